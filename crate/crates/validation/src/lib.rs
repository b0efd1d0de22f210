//! Acceptance suite for `pearson-core`; see `tests/acceptance.rs`.
