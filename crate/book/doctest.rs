// mdbook cannot run the book's code blocks as tests, so the chapters are
// included here as doc comments and `cargo test --doc -p pubtrend-guide`
// exercises every snippet. One module per chapter, so a failing doctest at
// least names the chapter it came from.

#![allow(unused_imports)]

use pubtrend as _;
use tempfile as _;

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/ratios.md")]
pub mod ratios {}
#[doc = include_str!("src/references.md")]
pub mod references {}
#[doc = include_str!("src/queries.md")]
pub mod queries {}
#[doc = include_str!("src/fixtures.md")]
pub mod fixtures {}
#[doc = include_str!("src/cache.md")]
pub mod cache {}
#[doc = include_str!("src/reports.md")]
pub mod reports {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
