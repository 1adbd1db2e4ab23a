//! Random JavaScript programs covering every function form the scanner knows,
//! plus the literals that must not be mistaken for functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen {
    rng: ChaCha8Rng,
    names: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            names: 0,
        }
    }

    fn name(&mut self) -> String {
        self.names += 1;
        format!("f{}", self.names)
    }

    fn sep(&mut self) -> &'static str {
        match self.rng.random_range(0..6) {
            0 => "\n",
            1 => "\n  ",
            2 => "",
            _ => " ",
        }
    }

    pub fn program(&mut self, statements: usize) -> String {
        let mut out = String::new();
        for _ in 0..statements {
            out.push_str(&self.statement(3, false));
            out.push('\n');
        }
        out
    }

    /// A function body.
    fn body(&mut self, depth: u32) -> String {
        self.block(depth, true)
    }

    fn block(&mut self, depth: u32, in_function: bool) -> String {
        let n = self.rng.random_range(0..3);
        let mut out = String::new();
        for _ in 0..n {
            out.push_str(self.sep());
            out.push_str(&self.statement(depth, in_function));
        }
        if in_function && self.rng.random_bool(0.4) {
            let e = self.expr(depth);
            out.push_str(&format!("{}return {e};", self.sep()));
        }
        out.push_str(self.sep());
        out
    }

    fn statement(&mut self, depth: u32, in_function: bool) -> String {
        let leaf = depth == 0;
        let pick = if leaf {
            self.rng.random_range(0..5)
        } else {
            self.rng.random_range(0..22)
        };
        let d = depth.saturating_sub(1);
        match pick {
            0 => format!("var {} = {};", self.name(), self.atom()),
            1 => "console.log(\"function fake() {}\", 'x => y', `t ${a} function t(){}`);".to_string(),
            2 => "var r = /function\\s*\\(\\)\\{[}]/g.test(s) / 2;".to_string(),
            3 => format!("// function c() {{}}\n/* () => 1 */ {} = a / b / c;", self.name()),
            4 => "if (a) { b(); } else { c = { k: 1 }; }".to_string(),
            5 => {
                let (n, s1, b, s2) = (self.name(), self.sep(), self.body(d), self.sep());
                format!("function {n}(a,{s1}b) {{{b}}}{s2}")
            }
            6 => {
                let (n, b) = (self.name(), self.body(d));
                format!("var {n} = function (x) {{{b}}};")
            }
            7 => {
                let (n, b) = (self.name(), self.body(d));
                format!("const {n} = async (x, {{ y, z }} = {{}}) => {{{b}}};")
            }
            8 => {
                let (n, e) = (self.name(), self.expr(d));
                format!("let {n} = x =>{}{e};", self.sep())
            }
            9 => self.object(d),
            10 => self.class(d),
            11 => {
                let (b1, b2) = (self.block(d, in_function), self.block(d, in_function));
                format!("if (x > 1) {{{b1}}} else {{{b2}}}")
            }
            12 => {
                let b = self.block(d, in_function);
                format!("for (var i = 0; i < 3; i++) {{{b}}}")
            }
            13 => {
                let b = self.block(d, in_function);
                format!("label{}: {{{b}}}", self.names)
            }
            14 => {
                let (b1, b2) = (self.block(d, in_function), self.block(d, in_function));
                format!("switch (x) {{ case 1: {{{b1}}} break; default: {b2} }}")
            }
            15 => {
                let (e, b) = (self.expr(d), self.body(d));
                format!("arr.map(x => {e}).filter(function (y) {{{b}}});")
            }
            16 => {
                let (e1, e2) = (self.expr(d), self.expr(d));
                format!("var {} = a ? () => {e1} : b => {e2};", self.name())
            }
            17 => {
                let (n, b) = (self.name(), self.body(d));
                format!("function* {n}() {{ yield 1;{b}}}")
            }
            18 => {
                let (n, b) = (self.name(), self.body(d));
                format!("async function {n}() {{ await a;{b}}}")
            }
            19 if in_function => {
                let e = self.expr(d);
                format!("return {e};")
            }
            20 => {
                let (n, b) = (self.name(), self.body(d));
                format!("function {n}(cb = () => 1, k = function () {{ return 2; }}) {{{b}}}")
            }
            _ => {
                let (e, b) = (self.expr(d), self.body(d));
                format!("(function () {{{b}}})(); setTimeout(() => {e}, 0);")
            }
        }
    }

    fn atom(&mut self) -> String {
        match self.rng.random_range(0..6) {
            0 => "1".into(),
            1 => "'str{'".into(),
            2 => "`tpl ${x + 1} }`".into(),
            3 => "a / b".into(),
            4 => "/re}/i".into(),
            _ => "({ k: [1, 2] })".into(),
        }
    }

    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 {
            return self.atom();
        }
        let d = depth - 1;
        match self.rng.random_range(0..9) {
            0 => format!("x + {}", self.atom()),
            1 => {
                let e = self.expr(d);
                format!("(y) => {e}")
            }
            2 => {
                let b = self.body(d);
                format!("function () {{{b}}}")
            }
            3 => {
                let e = self.expr(d);
                format!("`a ${{(() => {e})()}} b`")
            }
            4 => {
                let (e1, e2) = (self.expr(d), self.expr(d));
                format!("c ? {e1} : {e2}")
            }
            5 => {
                let b = self.body(d);
                format!("async () => {{{b}}}")
            }
            6 => {
                let e = self.expr(d);
                format!("g({e}, z => z)")
            }
            7 => {
                let e = self.expr(d);
                format!("a =>{}{e}", self.sep())
            }
            _ => self.atom(),
        }
    }

    fn object(&mut self, depth: u32) -> String {
        let mut members = Vec::new();
        for _ in 0..self.rng.random_range(1..5) {
            let m = match self.rng.random_range(0..9) {
                0 => format!("m{}(a) {{{}}}", { let k = self.names; k }, self.body(depth)),
                1 => "get g() { return 1; }".to_string(),
                2 => format!("set g(v) {{{}}}", self.body(depth)),
                3 => format!("k: function () {{{}}}", self.body(depth)),
                4 => "*gen() { yield 1; }".to_string(),
                5 => format!("async am() {{ await a;{}}}", self.body(depth)),
                6 => format!("['c' + 1]() {{{}}}", self.body(depth)),
                7 => format!("p: x => {}", self.expr(depth)),
                _ => "'q': { nested: 1 }".to_string(),
            };
            self.names += 1;
            members.push(m);
        }
        let sep = format!(",{}", self.sep());
        format!("var {} = {{ {} }};", self.name(), members.join(&sep))
    }

    fn class(&mut self, depth: u32) -> String {
        let mut members = Vec::new();
        if self.rng.random_bool(0.5) {
            members.push(format!("constructor() {{ super();{}}}", self.body(depth)));
        }
        for _ in 0..self.rng.random_range(0..4) {
            let m = match self.rng.random_range(0..6) {
                0 => format!("static s{}() {{{}}}", { let k = self.names; k }, self.body(depth)),
                1 => "get v() { return 1; }".to_string(),
                2 => format!("m{}() {{{}}}", { let k = self.names; k }, self.body(depth)),
                3 => format!("async a{}() {{{}}}", { let k = self.names; k }, self.body(depth)),
                4 => format!("*g{}() {{ yield 2; }}", self.names),
                _ => format!("['k' + {}]() {{}}", self.names),
            };
            self.names += 1;
            members.push(m);
        }
        let sep = self.sep().to_string();
        format!(
            "class {} extends Base {{{sep}{}{sep}}}",
            self.name(),
            members.join(&format!("{sep} "))
        )
    }
}
