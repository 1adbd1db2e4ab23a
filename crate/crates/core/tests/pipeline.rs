mod common;

use std::collections::BTreeSet;

use common::fixtures::{self, oracle_used};
use common::oracle::Model;
use common::sites::{copy_dir, corpus_site, fixture_site, ORIGIN};
use jsprune_core::cache::{serve, PageSnapshot, Variant};
use jsprune_core::js::{scan_functions, FunctionId};
use jsprune_core::pipeline::{
    finish, instrument_snapshot, load_discovery, load_report, run_many, run_pipeline, PipelineConfig, PipelineError,
    REPORT_FILE,
};
use jsprune_core::report::{aggregate, StageDurations};

const APP_URL: &str = "http://site.test/app.js";

fn run(dir: &std::path::Path) -> jsprune_core::pipeline::PipelineRun {
    run_pipeline(dir, &PipelineConfig::default()).unwrap()
}

#[test]
fn fixture_pages_eliminate_exactly_the_unfired_functions() {
    for f in fixtures::all() {
        let site = fixture_site(&f.name);
        let out = run(&site.dir);
        let r = &out.report;
        r.check().unwrap();
        assert!(r.discovery_complete, "{}", f.name);
        let fired = oracle_used(&Model::new(&f.script));
        assert_eq!(out.discovery.used.used, fired, "{}", f.name);
        assert_eq!(r.per_file.len(), 1, "{}", f.name);
        let row = &r.per_file[0];
        assert_eq!(row.total_functions, f.spans.len(), "{}", f.name);
        assert_eq!(row.eliminated_functions, f.spans.len() - fired.len(), "{}", f.name);

        // Serving deltas reconcile with the report.
        let snap = site.open();
        let orig = snap.total_bytes(Variant::Original).unwrap();
        let elim = snap.total_bytes(Variant::Eliminated).unwrap();
        assert_eq!(orig - elim, r.page.removed_bytes, "{}", f.name);
        assert_eq!(load_report(&site.dir.join(REPORT_FILE)).unwrap(), *r);
    }
}

#[test]
fn three_of_ten_firing_leaves_seven_eliminated() {
    let (site, page) = corpus_site(7, 10, 3);
    let r = run(&site.dir).report;
    assert_eq!(r.page.total_functions, 10);
    assert_eq!(r.page.eliminated_functions, 7);
    let snap = site.open();
    let text = String::from_utf8(snap.body(APP_URL, Variant::Eliminated).unwrap()).unwrap();
    let kept: BTreeSet<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.contains("{}") && !l.contains("=> {}"))
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(kept, page.live.iter().copied().collect());
}

#[test]
fn a_page_without_script_saves_nothing() {
    let site = common::sites::build_site(
        &[("index.html", "<html><body><p>static</p></body></html>")],
        &format!("{{\"url\": \"{ORIGIN}index.html\"}}"),
    );
    let r = run(&site.dir).report;
    assert!(r.per_file.is_empty());
    assert!(r.skipped_files.is_empty());
    assert_eq!(r.page.removed_bytes, 0);
}

#[test]
fn unchanged_snapshots_give_identical_runs() {
    let (site, _) = corpus_site(11, 20, 6);
    let copy = tempfile::tempdir().unwrap();
    copy_dir(&site.dir, copy.path());

    let a = run(&site.dir).report;
    let first = site.open().body(APP_URL, Variant::Eliminated).unwrap();
    let b = run(&site.dir).report;
    let c = run(copy.path()).report;
    assert_eq!(a.without_timings(), b.without_timings());
    assert_eq!(a.without_timings(), c.without_timings());
    assert_eq!(site.open().body(APP_URL, Variant::Eliminated).unwrap(), first);
    assert_eq!(
        PageSnapshot::open(copy.path()).unwrap().body(APP_URL, Variant::Eliminated).unwrap(),
        first
    );
}

#[test]
fn interrupted_discovery_serves_everything_as_captured() {
    let site = fixture_site("tabs");
    let mut script: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(site.dir.join("sim.json")).unwrap()).unwrap();
    script["listeners"][0]["effects"] = serde_json::json!(["crash"]);
    std::fs::write(site.dir.join("sim.json"), script.to_string()).unwrap();

    let out = run(&site.dir);
    assert!(!out.discovery.complete);
    assert!(!out.report.discovery_complete);
    assert!(out.report.per_file.is_empty());
    assert_eq!(out.report.skipped_files.len(), 1);
    assert_eq!(out.report.skipped_files[0].reason, "discovery incomplete");
    let snap = site.open();
    assert_eq!(
        snap.body(APP_URL, Variant::Eliminated).unwrap(),
        snap.body(APP_URL, Variant::Original).unwrap()
    );
    assert!(!load_discovery(&site.dir).unwrap().complete);
}

#[test]
fn unparseable_files_are_skipped_and_served_original() {
    let broken = "function ok() { return 1; }\nfunction broken( {\n";
    let site = common::sites::build_site(
        &[
            ("index.html", "<html><body><script src=\"app.js\"></script><script src=\"bad.js\"></script></body></html>"),
            ("app.js", "function live() { return 1; }\nfunction dead() { return 2; }\n"),
            ("bad.js", broken),
        ],
        &format!("{{\"url\": \"{ORIGIN}index.html\", \"on_load\": [\"app.js#live\"]}}"),
    );
    let r = run(&site.dir).report;
    assert_eq!(r.per_file.len(), 1);
    assert_eq!(r.skipped_files.len(), 1);
    assert!(r.skipped_files[0].reason.starts_with("parse error"));
    assert_eq!(r.page.skipped_bytes, broken.len() as u64);
    let snap = site.open();
    assert_eq!(snap.body("http://site.test/bad.js", Variant::Eliminated).unwrap(), broken.as_bytes());
}

#[test]
fn third_party_scripts_are_left_alone() {
    let site = common::sites::build_site(
        &[
            ("index.html", "<html><body><script src=\"app.js\"></script></body></html>"),
            ("app.js", "function live() { return 1; }\n"),
        ],
        &format!("{{\"url\": \"{ORIGIN}index.html\", \"on_load\": [\"app.js#live\"]}}"),
    );
    let mut snap = site.open();
    let lib = "function tracker() { return navigator.userAgent; }\n";
    snap.add_resource(
        "http://cdn.example/lib.js",
        200,
        vec![("content-type".into(), "text/javascript".into())],
        lib.as_bytes(),
    )
    .unwrap();
    snap.save().unwrap();
    let r = run(&site.dir).report;
    assert_eq!(r.skipped_files[0].reason, "third-party");
    assert_eq!(r.page.skipped_bytes, lib.len() as u64);
    assert_eq!(
        site.open().body("http://cdn.example/lib.js", Variant::Eliminated).unwrap(),
        lib.as_bytes()
    );
}

#[test]
fn a_missing_page_script_is_an_error() {
    let site = fixture_site("dropdown");
    std::fs::remove_file(site.dir.join("sim.json")).unwrap();
    assert!(matches!(
        run_pipeline(&site.dir, &PipelineConfig::default()),
        Err(PipelineError::NoSimScript(_))
    ));
}

#[test]
fn eliminated_variant_is_served_after_the_run() {
    let site = fixture_site("dropdown");
    run(&site.dir);
    let snap = site.open();
    let server = serve(&snap, Variant::Eliminated, "127.0.0.1:0").unwrap();
    let mut resp = ureq::get(&format!("http://{}/app.js", server.addr())).call().unwrap();
    let body = resp.body_mut().read_to_vec().unwrap();
    assert_eq!(body, snap.body(APP_URL, Variant::Eliminated).unwrap());
    assert!(body.len() < snap.body(APP_URL, Variant::Original).unwrap().len());
    assert!(scan_functions(&String::from_utf8(body).unwrap(), "app.js").is_ok());
}

#[test]
fn stages_can_run_separately() {
    let site = fixture_site("modal");
    let mut snap = site.open();
    let summary = instrument_snapshot(&mut snap, jsprune_core::js::DEFAULT_PROBE_TOKEN).unwrap();
    assert_eq!(summary.files, 2);
    let config = PipelineConfig::default();
    let d = jsprune_core::pipeline::discover_snapshot(&snap, &config).unwrap();
    let r = finish(&mut snap, &d.used, true, StageDurations::default()).unwrap();
    let whole = run(&site.dir).report;
    assert_eq!(r.without_timings(), whole.without_timings());
}

#[test]
fn pages_run_in_parallel() {
    let sites: Vec<_> = (0..4).map(|s| corpus_site(100 + s, 10, 3).0).collect();
    let dirs: Vec<_> = sites.iter().map(|s| s.dir.clone()).collect();
    let config = PipelineConfig {
        workers: 2,
        ..PipelineConfig::default()
    };
    let runs = run_many(&dirs, &config).unwrap();
    let reports: Vec<_> = runs.into_iter().map(|r| r.unwrap().report).collect();
    let dist = aggregate(&reports).unwrap();
    assert_eq!(dist.pages, 4);
    assert_eq!(dist.eliminated_fraction.median, 0.7);
    assert_eq!(dist.eliminated_functions.cdf.last().unwrap().fraction, 1.0);
}

#[test]
fn used_ids_are_parseable_function_ids() {
    let site = fixture_site("navigation");
    let out = run(&site.dir);
    for id in out.discovery.used.iter() {
        assert_eq!(id.to_string().parse::<FunctionId>().unwrap(), *id);
    }
}
