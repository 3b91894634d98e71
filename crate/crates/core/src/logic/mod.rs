//! Propositional sentences, worlds, consistency enumeration, and deductive processes.

mod process;
mod sentence;
mod world;

pub use process::{
    DeductivePrefix, DeductiveProcess, ReflectiveProcess, SaturationProcess, ScriptedProcess,
};
pub use sentence::{Atom, Sentence};
pub use world::{
    decided_value, decides, eval_sentence, plausible_worlds, TheoremSet, World, DEFAULT_ATOM_CAP,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogicError {
    #[error("`{0}` is not a valid atom name")]
    BadAtom(String),
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("atom `{0}` is not covered by the world")]
    UncoveredAtom(Atom),
    #[error("world enumeration over {atoms} atoms exceeds the cap of {cap}")]
    AtomCap { atoms: usize, cap: usize },
    #[error("process file line {line}: {msg}")]
    Script { line: usize, msg: String },
    #[error("process configuration: {0}")]
    Config(String),
}
