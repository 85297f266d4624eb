//! Small bundled inputs, also shipped as files under `fixtures/`.

use rrn_core::dsl::{parse_facts, parse_program, Program};
use rrn_core::kb::SampleKb;

/// Mary holds the apple in the kitchen.
pub const KITCHEN_ONTOLOGY: &str = include_str!("../fixtures/kitchen.ont");
pub const KITCHEN_FACTS: &str = include_str!("../fixtures/kitchen.tsv");

pub fn kitchen() -> (Program, SampleKb) {
    let program = parse_program(KITCHEN_ONTOLOGY).expect("bundled ontology parses");
    let facts = parse_facts(KITCHEN_FACTS, &program.vocabulary).expect("bundled facts parse");
    (program, facts)
}
