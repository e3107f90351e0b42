//! Bundled example programs.

use crate::ast::{Prog, VarSet};
use crate::parser::parse;

#[derive(Debug, Clone, Copy)]
pub struct Example {
    pub name: &'static str,
    pub source: &'static str,
}

pub const CRUISE: Example = Example {
    name: "cruise",
    source: include_str!("../programs/cruise.hyb"),
};

pub const ZENO: Example = Example {
    name: "zeno",
    source: include_str!("../programs/zeno.hyb"),
};

pub const COUNTER: Example = Example {
    name: "counter",
    source: include_str!("../programs/counter.hyb"),
};

pub const BALL: Example = Example {
    name: "ball",
    source: include_str!("../programs/ball.hyb"),
};

pub const ALL: [Example; 4] = [CRUISE, ZENO, COUNTER, BALL];

impl Example {
    pub fn parse(&self) -> (Prog, VarSet) {
        parse(self.source).expect("bundled example parses")
    }
}

pub fn find(name: &str) -> Option<Example> {
    ALL.iter().copied().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_examples_parse() {
        for e in ALL {
            let (_, vars) = e.parse();
            assert!(!vars.is_empty(), "{}", e.name);
        }
        assert_eq!(find("ball").unwrap().parse().1.names(), vec!["p", "v"]);
        assert!(find("nope").is_none());
    }
}
