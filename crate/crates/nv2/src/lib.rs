//! Exact computation in the higher-dimensional Thompson group 2V.
//!
//! Elements are represented by numbered pattern pairs over the dyadic
//! square; all arithmetic is exact (binary words, never floating point).
//! The crate provides:
//!
//! * [`cantor`]: binary words, dyadic rectangles, patterns and their
//!   common refinements;
//! * [`element`]: group elements as pattern pairs, with composition,
//!   inversion, evaluation and reduction;
//! * [`gridform`]: the unique reduced grid-diagram normal form and the
//!   derived equality test and length lower bound;
//! * [`treealg`]: colored-tree representatives, minimal tree pairs and the
//!   decomposition of an element into tree words and a permutation;
//! * [`genset`]: the finite generating set, word parsing and evaluation;
//! * [`metric`]: breadth-first balls of the word metric, exact lengths and
//!   geodesic witnesses;
//! * [`divergence`]: certified detour paths between far elements avoiding a
//!   ball around the identity, with machine-checkable certificates.

pub mod cantor;
pub mod element;
pub mod gridform;
pub mod metric;
pub mod genset;
pub mod treealg;
pub mod divergence;
