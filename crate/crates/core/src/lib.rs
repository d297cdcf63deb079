//! Batch-dynamic maximal matching on hypergraphs of bounded rank.
//!
//! ```
//! use hypermatch::dynamic::{Engine, EngineConfig};
//! use hypermatch::types::{EdgeId, Hyperedge};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let mut g = Engine::new(EngineConfig::new(3, 42))?;
//! g.insert_edges(vec![Hyperedge::from_raw(1, &[1, 2, 3]), Hyperedge::from_raw(2, &[3, 4])])?;
//! g.delete_edges(&[EdgeId(1)])?;
//! assert_eq!(g.matched_edges(), vec![EdgeId(2)]);
//! g.check_invariants()?;
//! # Ok(())
//! # }
//! ```

pub mod accounting;
pub mod cli;
pub mod dynamic;
pub mod greedy;
pub mod leveled;
pub mod parprims;
pub mod setcover;
pub mod stream;
pub mod types;
pub mod workload;
