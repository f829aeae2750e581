//! Toolchain for candidate MOOSE input files: deterministic sanitation,
//! grammar-constrained repair, type-name correction against an application
//! syntax registry, pluggable validation/execution backends, and
//! retrieval-oriented chunking.
//!
//! The crate is organized around the stages of the input precheck pipeline:
//!
//! - [`sanitize`] — character-level cleanup with an auditable change report
//! - [`hit`] — lossless parser/renderer for the HIT block format
//! - [`repair`] — bounded, parse-failure-localized auto-repair
//! - [`registry`] — object/type validation and "did you mean" correction
//! - [`exec`] — local, remote (JSON-RPC) and mock execution backends
//! - [`precheck`] — the composite bounded pipeline and report
//! - [`ingest`] — parent/child document chunking for retrieval corpora
//! - [`mutation`] — seeded corpus mutations for measuring recovery
//!
//! The `hitcheck` binary exposes each stage as a CLI subcommand; see the
//! book under `book/` for a guided tour.

pub mod exec;
pub mod hit;
pub mod ingest;
pub mod mutation;
pub mod precheck;
pub mod registry;
pub mod repair;
pub mod sanitize;
pub mod span;

#[cfg(doctest)]
mod book_doctests {
    //! Keeps the book's code snippets compiling: every chapter is pulled in
    //! as a doc comment so `cargo test --doc` runs its examples.
    macro_rules! book_chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(unused)]
            pub struct $name;
        };
    }

    book_chapter!(HitFormat, "../../../book/src/hit-format.md");
    book_chapter!(Sanitation, "../../../book/src/sanitation.md");
    book_chapter!(Repair, "../../../book/src/repair.md");
    book_chapter!(TypeCorrection, "../../../book/src/type-correction.md");
    book_chapter!(Execution, "../../../book/src/execution.md");
    book_chapter!(Precheck, "../../../book/src/precheck.md");
    book_chapter!(Chunking, "../../../book/src/chunking.md");
    book_chapter!(MutationCorpus, "../../../book/src/mutation-corpus.md");
}
