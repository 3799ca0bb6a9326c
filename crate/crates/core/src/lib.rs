//! Portfolio choice and lifetime investment planning under a no-short-sale constraint.
//!
//! The crate is organised bottom-up:
//!
//! * [`market`] turns a CSV of per-period returns into annualized [`market::AssetStats`].
//! * [`markowitz`] evaluates the unconstrained closed-form frontier and tangency portfolio.
//! * [`qp`] is a dense primal active-set solver for convex quadratic programs.
//! * [`portfolio`] maximizes the Sharpe ratio and traces the frontier with `w >= 0, 1'w = 1`.
//! * [`insurance`] values an insurance contract whose strike time has a constant hazard rate.
//! * [`lifecycle`] assembles the multi-year stock/borrow/save/house/insurance program and
//!   solves it by enumerating the house-purchase year.
//!
//! Data-parallel loops (Monte-Carlo chunks, frontier points, house-year branches) go through
//! [`Execution`]. With the default `parallel` feature they run on rayon; without it every
//! mode falls back to a sequential loop with identical results.

pub mod exec;
pub mod insurance;
pub mod lifecycle;
pub mod market;
pub mod markowitz;
pub mod portfolio;
pub mod qp;

pub use exec::Execution;
