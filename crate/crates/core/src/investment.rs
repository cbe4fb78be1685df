//! Collective investment through interest-free member loans. Each participant
//! receives a share of the project's generation proportional to the loan and
//! is repaid in equal yearly installments.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_REPAYMENT_YEARS: u32 = 25;
pub const DEFAULT_MIN_CONTRIBUTION_CENTS: i64 = 100_00;

#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub participant: String,
    pub loan_cents: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub name: String,
    pub peak_kw: f64,
    pub capex_cents: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvestmentPool {
    contributions: Vec<Contribution>,
    project: Project,
    repayment_years: u32,
    min_contribution_cents: i64,
}

impl InvestmentPool {
    pub fn new(
        contributions: Vec<Contribution>,
        project: Project,
        repayment_years: u32,
        min_contribution_cents: i64,
    ) -> Result<Self> {
        if repayment_years == 0 {
            return Err(Error::Pool("repayment period must be at least one year".into()));
        }
        for c in &contributions {
            if c.loan_cents < min_contribution_cents {
                return Err(Error::Pool(format!(
                    "loan of {} by '{}' is below the minimum of {}",
                    format_cents(c.loan_cents),
                    c.participant,
                    format_cents(min_contribution_cents)
                )));
            }
        }
        let total: i64 = contributions.iter().map(|c| c.loan_cents).sum();
        if total > project.capex_cents {
            return Err(Error::Pool(format!(
                "loans total {} but the project costs {}",
                format_cents(total),
                format_cents(project.capex_cents)
            )));
        }
        Ok(Self { contributions, project, repayment_years, min_contribution_cents })
    }

    /// Pool with the default 25-year horizon and 100 € minimum loan.
    pub fn with_defaults(contributions: Vec<Contribution>, project: Project) -> Result<Self> {
        Self::new(contributions, project, DEFAULT_REPAYMENT_YEARS, DEFAULT_MIN_CONTRIBUTION_CENTS)
    }

    pub fn contributions(&self) -> &[Contribution] {
        &self.contributions
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn repayment_years(&self) -> u32 {
        self.repayment_years
    }

    pub fn min_contribution_cents(&self) -> i64 {
        self.min_contribution_cents
    }

    pub fn total_cents(&self) -> i64 {
        self.contributions.iter().map(|c| c.loan_cents).sum()
    }
}

/// Formats an integer amount of cents as `123.45`.
pub fn format_cents(cents: i64) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let abs = cents.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

pub fn generation_shares(pool: &InvestmentPool) -> Result<Vec<f64>> {
    let total = pool.total_cents();
    if pool.contributions.is_empty() || total <= 0 {
        return Err(Error::Pool("pool has no contributions".into()));
    }
    Ok(pool.contributions.iter().map(|c| c.loan_cents as f64 / total as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Installment {
    pub year: u32,
    pub amount_cents: i64,
}

/// Splits a loan into `years` installments for years `1..=years`. Every
/// installment but the last is the loan divided by the horizon, truncated to
/// the cent; the last takes the remainder.
pub fn loan_installments(loan_cents: i64, years: u32) -> Vec<Installment> {
    let base = loan_cents / years as i64;
    (1..=years)
        .map(|year| Installment {
            year,
            amount_cents: if year == years { loan_cents - base * (years as i64 - 1) } else { base },
        })
        .collect()
}

/// One installment list per contribution, in pool order.
pub fn repayment_schedule(pool: &InvestmentPool) -> Vec<Vec<Installment>> {
    pool.contributions
        .iter()
        .map(|c| loan_installments(c.loan_cents, pool.repayment_years))
        .collect()
}

/// Splits the project's generation series between participants by share.
pub fn allocate_project_energy(pool: &InvestmentPool, generation: &[f64]) -> Result<Vec<Vec<f64>>> {
    let shares = generation_shares(pool)?;
    Ok(shares
        .iter()
        .map(|s| generation.iter().map(|g| s * g).collect())
        .collect())
}
