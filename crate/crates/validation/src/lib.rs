//! Acceptance suite for `gexp-core`; see `tests/acceptance.rs`.
