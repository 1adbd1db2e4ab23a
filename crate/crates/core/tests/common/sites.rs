//! Snapshot directories built from fixture pages and from generated
//! pages with a known share of dead functions.

use std::path::{Path, PathBuf};

use jsprune_core::cache::{import_dir, CaptureOptions, PageSnapshot};
use jsprune_core::driver::{Effect, ListenerSpec, SimElement, SimPageScript};
use jsprune_core::pipeline::SIM_SCRIPT_FILE;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use super::fixtures::pages_dir;

pub const ORIGIN: &str = "http://site.test/";

/// A snapshot in a temporary directory, removed on drop.
pub struct Site {
    pub tmp: TempDir,
    pub dir: PathBuf,
}

impl Site {
    pub fn open(&self) -> PageSnapshot {
        PageSnapshot::open(&self.dir).unwrap()
    }
}

const INDEX: &str = "<!doctype html>\n<html><head><title>t</title></head>\n<body><script src=\"app.js\"></script></body></html>\n";

/// Imports `files` as a site rooted at [`ORIGIN`] and stores `script` as the page script.
pub fn build_site(files: &[(&str, &str)], script: &str) -> Site {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    for (name, body) in files {
        let path = src.join(name);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, body).unwrap();
    }
    let dir = tmp.path().join("snapshot");
    import_dir(&src, ORIGIN, "index.html", &CaptureOptions::new(&dir)).unwrap();
    std::fs::write(dir.join(SIM_SCRIPT_FILE), script).unwrap();
    Site { tmp, dir }
}

pub fn fixture_site(name: &str) -> Site {
    let page = pages_dir().join(name);
    let app = std::fs::read_to_string(page.join("app.js")).unwrap();
    let script = std::fs::read_to_string(page.join("page.json")).unwrap();
    build_site(&[("index.html", INDEX), ("app.js", &app)], &script)
}

pub fn copy_dir(from: &Path, to: &Path) {
    for entry in walkdir::WalkDir::new(from).into_iter().map(Result::unwrap) {
        let target = to.join(entry.path().strip_prefix(from).unwrap());
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).unwrap();
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A generated page: `total` top-level functions in `app.js`, of which
/// exactly `live` run on load or through some reachable event.
pub struct CorpusPage {
    pub app: String,
    pub script: String,
    pub live: Vec<usize>,
}

/// Live functions are spread over load handlers, visible listeners and
/// listeners behind a reveal; dead ones are either never referenced or
/// attached inside a region nothing reveals.
pub fn corpus_page(seed: u64, total: usize, live: usize) -> CorpusPage {
    assert!(live <= total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (1..=total).collect();
    ids.shuffle(&mut rng);
    let (alive, dead) = ids.split_at(live);
    let mut alive = alive.to_vec();
    alive.sort();

    let app: String = (1..=total)
        .map(|n| match n % 3 {
            0 => format!("function f{n}(e) {{ return e + {n}; }}\n"),
            1 => format!("var f{n} = function () {{ console.info('f{n}'); }};\n"),
            _ => format!("const f{n} = (a, b) => a * {n} + b;\n"),
        })
        .collect();
    let handler = |n: usize| format!("app.js|{n}|{n}");

    let mut elements = vec![
        SimElement {
            key: "panel".into(),
            tag: "div".into(),
            id: Some("panel".into()),
            class: None,
            parent: None,
            hidden: true,
        },
        SimElement {
            key: "vault".into(),
            tag: "div".into(),
            id: None,
            class: Some("vault".into()),
            parent: None,
            hidden: true,
        },
        SimElement {
            key: "opener".into(),
            tag: "button".into(),
            id: Some("opener".into()),
            class: None,
            parent: None,
            hidden: false,
        },
    ];
    let mut on_load = Vec::new();
    let mut listeners = vec![ListenerSpec {
        element: "opener".into(),
        event: "click".into(),
        handlers: vec![],
        effects: vec![Effect::Reveal(vec!["panel".into()])],
    }];
    let mut place = |n: usize, parent: Option<&str>, kind: &str, rng: &mut ChaCha8Rng| {
        let key = format!("el{}", elements.len());
        elements.push(SimElement {
            key: key.clone(),
            tag: ["button", "a", "li"][rng.random_range(0..3)].into(),
            id: None,
            class: None,
            parent: parent.map(str::to_string),
            hidden: false,
        });
        listeners.push(ListenerSpec {
            element: key,
            event: kind.into(),
            handlers: vec![handler(n)],
            effects: vec![],
        });
    };
    for &n in &alive {
        match rng.random_range(0..4) {
            0 => on_load.push(handler(n)),
            1 => place(n, None, "click", &mut rng),
            2 => place(n, Some("panel"), "mouseover", &mut rng),
            _ => place(n, Some("panel"), "click", &mut rng),
        }
    }
    for &n in dead {
        if rng.random_bool(0.5) {
            place(n, Some("vault"), "click", &mut rng);
        }
    }
    // The opener's own handler must be live; borrow one from the live set if any.
    if let Some(n) = on_load.pop() {
        listeners[0].handlers.push(n);
    }
    let script = SimPageScript {
        url: format!("{ORIGIN}index.html"),
        on_load,
        load_logs: vec![],
        elements,
        listeners,
    };
    CorpusPage {
        app,
        script: serde_json::to_string_pretty(&script).unwrap(),
        live: alive,
    }
}

pub fn corpus_site(seed: u64, total: usize, live: usize) -> (Site, CorpusPage) {
    let page = corpus_page(seed, total, live);
    let site = build_site(&[("index.html", INDEX), ("app.js", &page.app)], &page.script);
    (site, page)
}
