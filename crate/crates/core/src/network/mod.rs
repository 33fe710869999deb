//! Positive-sequence grid model and steady-state AC power flow.

mod grid;
mod layout;
mod powerflow;

pub use grid::{build_canonical_grid, Branch, BranchKind, Bus, BusKind, GenKind, Generator, GridLoad, GridModel};
pub use layout::{CableType, EarthingPoint, NetworkLayout, TransformerType};
pub use powerflow::{
    check_ratings, solve_power_flow, write_branch_csv, write_bus_csv, BranchResult, BusResult, Injections,
    Overload, PowerFlowOptions, PowerFlowResult, UnitResult,
};
