//! Energy rationing for prepaid electricity customers.
//!
//! Three setpoint policies share one set of domain types:
//!
//! * [`afg`]: a fractional-knapsack LP over daily enable durations, solved
//!   greedily from daily average demand and turned into per-load wallet
//!   thresholds plus daily virtual-wallet recharges.
//! * [`milp`]: the detailed threshold MILP and the per-step scheduling MILP,
//!   with an exact knapsack branch-and-bound, a desk-scale threshold grid
//!   search, an LP-file writer and an external solver bridge.
//! * [`sim`]: the discrete-time wallet simulator that evaluates any of the
//!   above (and the unrationed baseline) against true demand.
//!
//! [`forecast`] provides data ingestion, synthetic households and the
//! forecast regimes used by the experiment harness.

pub mod afg;
pub mod forecast;
pub mod milp;
pub mod model;
pub mod rng;
pub mod sim;

pub use afg::{EnablePlan, ThresholdPlan};
pub use model::{
    Budget, DailyAverageDemand, DemandSeries, Load, LoadSet, ModelError, PsfReport, Tariff,
    TimeGrid,
};
pub use sim::SimResult;
