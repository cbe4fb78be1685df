//! Planning and operation numerics for energy communities: allocation keys,
//! tariff billing, storage dispatch, PV/storage sizing, impact indicators,
//! legal compliance checks and collective-investment accounting.

pub mod allocation;
pub mod compliance;
pub mod dispatch;
pub mod error;
pub mod indicators;
pub mod investment;
pub mod lp;
pub mod model;
pub mod sizing;
pub mod tariffs;

pub use allocation::{
    default_pro_rata_key, fixed_ratio_key, is_feasible_key, priority_key, project_key, residual_load, KeyViolation,
    RepartitionKey, ViolationKind, FEASIBILITY_TOL,
};
pub use compliance::{
    assess, check_governance, check_proximity, haversine_km, CommunityType, ComplianceVerdict, FeederGraph, Finding,
    GenerationAsset, GovernanceRules, NodeKind, ProximityMethod, Severity,
};
pub use dispatch::{solve_dispatch, verify_dispatch, DispatchProblem, DispatchResult};
pub use error::{Error, Result};
pub use indicators::{
    build_impact_report, community_score, emissions_value, renewable_share, stakeholder_deltas, CommunityOutcome,
    Comparison, ImpactReport, IndicatorFactors, ScoreWeights, StakeholderDeltas,
};
pub use investment::{
    allocate_project_energy, generation_shares, repayment_schedule, Contribution, Installment, InvestmentPool, Project,
};
pub use model::{
    resample_profile, validate_scenario, CommunityScenario, GenerationProfile, GeoPoint, LoadMatrix, Member,
    MemberCategory, PvSpec, StorageSpec, TimeGrid, ValidationReport,
};
pub use sizing::{
    capital_recovery_factor, optimize_sizing, Candidate, PvOption, RepresentativeDay, SizingCatalog, SizingResult,
    StorageOption,
};
pub use tariffs::{
    business_as_usual_bills, compute_bills, Bill, Cents, MemberBill, Source, TariffBand, TariffSchedule,
};
