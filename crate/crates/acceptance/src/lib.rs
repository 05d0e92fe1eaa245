//! Holds no code; the checks live in `tests/acceptance.rs`, a plain binary that
//! prints one verdict per criterion and fails when any criterion does.
