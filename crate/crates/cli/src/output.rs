//! Fixed-precision number formatting: 9 decimals for energies and ratios,
//! 2 decimals (rounded half-up) for euro amounts.

use ecplan_core::tariffs::round_half_up_cents;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub fn energy(x: f64) -> String {
    let s = format!("{x:.9}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

/// Formats a row of energies with 9 decimals so that the printed entries
/// add up to the printed row total: entries are rounded to the nearest
/// billionth, then the ones with the largest rounding error move by one
/// billionth until the sums agree. An entry never moves past its ceiling
/// or floor, so bounds that sit on the 9-decimal grid are kept.
pub fn energy_row(row: &[f64]) -> Vec<String> {
    let scaled: Vec<f64> = row.iter().map(|v| v * 1e9).collect();
    let mut units: Vec<i128> = scaled.iter().map(|v| v.round() as i128).collect();
    let target = scaled.iter().sum::<f64>().round() as i128;
    let gap = target - units.iter().sum::<i128>();
    let step = gap.signum();
    let mut order: Vec<usize> = (0..row.len())
        .filter(|&i| (scaled[i] - units[i] as f64) * step as f64 > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        let err = |i: usize| (scaled[i] - units[i] as f64) * step as f64;
        err(b).total_cmp(&err(a)).then(a.cmp(&b))
    });
    for &i in order.iter().take(gap.unsigned_abs() as usize) {
        units[i] += step;
    }
    units.into_iter().map(format_nanos).collect()
}

fn format_nanos(n: i128) -> String {
    let sign = if n < 0 { "-" } else { "" };
    let abs = n.unsigned_abs();
    format!("{sign}{}.{:09}", abs / 1_000_000_000, abs % 1_000_000_000)
}

pub fn eur_from_cents(cents: f64) -> String {
    let whole = round_half_up_cents(cents) as i64;
    let sign = if whole < 0 { "-" } else { "" };
    let abs = whole.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

pub fn eur(euros: f64) -> String {
    eur_from_cents(euros * 100.0)
}

fn raw<S: Serializer>(text: String, s: S) -> Result<S::Ok, S::Error> {
    RawValue::from_string(text).map_err(serde::ser::Error::custom)?.serialize(s)
}

/// `serialize_with` helper writing an energy or ratio with 9 decimals.
pub fn ser_energy<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(energy(*x), s)
}

/// `serialize_with` helper writing a euro amount with 2 decimals.
pub fn ser_eur<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(eur(*x), s)
}

pub fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}
