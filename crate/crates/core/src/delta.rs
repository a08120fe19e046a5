//! Generalized Hooley Δ₃ functions, exactly.
//!
//! Δ₃(n, f, u, v) = Σ_{d₁d₂ | n, e^{uᵢ} < dᵢ ≤ e^{uᵢ+vᵢ}} f₁(d₁)f₂(d₂) and
//! Δ₃(n, f) is the sup of |·| over u ∈ R², v ∈ [0,1]².
//!
//! Only divisor-anchored windows can be optimal: sliding a window without
//! changing its divisor content never changes the sum. A window can select
//! exactly the divisor run D_i..D_j iff D_j/D_i < e strictly (half-open unit
//! windows), so the sup is a maximum over run pairs. Sums are compared by
//! exact squared norms in Z[ω]; the weights are (1,1) or (χ, χ²).

use crate::arith::factor;
use crate::character::{ChiValue, CubicCharacter, EisensteinInt};
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaWeights {
    /// f = (1, 1): the classical Hooley Δ₃
    Unit,
    /// f = (χ, χ²)
    CharPair,
}

/// Half-open window pair (e^{uᵢ}, e^{uᵢ+vᵢ}], v ∈ [0,1]².
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaWindow {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
}

/// Sup window sum: the exact value in Z[ω], its squared norm, and a window
/// attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaResult {
    pub sup_norm_sq: i128,
    pub value: EisensteinInt,
    pub witness: DeltaWindow,
}

/// Divisor-indexed scratch tables for one n.
struct DivisorTables {
    divisors: Vec<u64>,
    logs: Vec<f64>,
    /// largest j with D_j/D_i < e (float compare; for n ≤ 10⁸ the nearest
    /// divisor ratio to e is off by > 10⁻⁸ in log, far above f64 noise)
    run_end: Vec<usize>,
    /// divides[a]: bitset over b with D_b | n / D_a
    divides: Vec<Vec<u64>>,
    /// per-axis weights
    w1: Vec<ChiValue>,
    w2: Vec<ChiValue>,
}

fn build_tables(n: u64, weights: DeltaWeights, chi: Option<&CubicCharacter>) -> Result<DivisorTables> {
    let divisors = factor(n)?.divisors();
    let tau = divisors.len();
    if (tau as u64) * (tau as u64) > 10_000_000 {
        return Err(Error::OracleScale(format!("tau(n)^2 too large for n = {n}")));
    }
    let logs: Vec<f64> = divisors.iter().map(|&d| (d as f64).ln()).collect();
    let run_end = (0..tau)
        .map(|i| {
            let mut j = i;
            while j + 1 < tau && logs[j + 1] - logs[i] < 1.0 {
                j += 1;
            }
            j
        })
        .collect();
    let words = tau.div_ceil(64);
    let mut divides = vec![vec![0u64; words]; tau];
    for (a, &da) in divisors.iter().enumerate() {
        let rest = n / da;
        for (b, &db) in divisors.iter().enumerate() {
            if rest % db == 0 {
                divides[a][b / 64] |= 1 << (b % 64);
            }
        }
    }
    let (w1, w2): (Vec<ChiValue>, Vec<ChiValue>) = match weights {
        DeltaWeights::Unit => (
            vec![ChiValue::One; tau],
            vec![ChiValue::One; tau],
        ),
        DeltaWeights::CharPair => {
            let chi = chi.ok_or_else(|| {
                Error::Validation("character weights need a character".into())
            })?;
            (
                divisors.iter().map(|&d| chi.value(d)).collect(),
                divisors.iter().map(|&d| chi.value(d).pow(2)).collect(),
            )
        }
    };
    Ok(DivisorTables { divisors, logs, run_end, divides, w1, w2 })
}

impl DivisorTables {
    /// Window for the run pair, built inside the feasibility slack.
    fn witness(&self, r1: (usize, usize), r2: (usize, usize)) -> DeltaWindow {
        let place = |(i, j): (usize, usize)| -> (f64, f64) {
            let slack = 1.0 - (self.logs[j] - self.logs[i]);
            let left_mid = if i == 0 {
                self.logs[i] - 0.5
            } else {
                0.5 * (self.logs[i - 1] + self.logs[i])
            };
            let u = left_mid.max(self.logs[j] - 1.0 + 0.25 * slack);
            (u, self.logs[j] - u)
        };
        let (u1, v1) = place(r1);
        let (u2, v2) = place(r2);
        DeltaWindow { u1, v1, u2, v2 }
    }
}

/// Maximize |Σ| over pairs of index ranges, ranges supplied per axis.
/// Equal norms are broken by lexicographically smallest (i1, i2, j1, j2).
fn max_over_range_pairs(
    t: &DivisorTables,
    ranges1: &[(usize, usize)],
    ranges2: &[(usize, usize)],
) -> (i128, EisensteinInt, (usize, usize), (usize, usize)) {
    let tau = t.divisors.len();
    let mut best: (i128, EisensteinInt, (usize, usize), (usize, usize)) =
        (-1, EisensteinInt::ZERO, (0, 0), (0, 0));
    let key_of = |r1: (usize, usize), r2: (usize, usize)| (r1.0, r2.0, r1.1, r2.1);
    let mut best_key = (usize::MAX, usize::MAX, usize::MAX, usize::MAX);
    // per-axis-2 range: T_a = Σ_{b ∈ range2, D_b | n/D_a} w2(D_b), then a
    // prefix array over a turns every axis-1 range into one subtraction
    let mut t_a = vec![EisensteinInt::ZERO; tau];
    for &r2 in ranges2 {
        for a in 0..tau {
            let mut acc = EisensteinInt::ZERO;
            let mask = &t.divides[a];
            for b in r2.0..=r2.1 {
                if mask[b / 64] >> (b % 64) & 1 == 1 {
                    acc += t.w2[b].to_eisenstein();
                }
            }
            t_a[a] = acc;
        }
        let mut prefix = Vec::with_capacity(tau + 1);
        prefix.push(EisensteinInt::ZERO);
        let mut acc = EisensteinInt::ZERO;
        for a in 0..tau {
            acc += t.w1[a].to_eisenstein() * t_a[a];
            prefix.push(acc);
        }
        for &r1 in ranges1 {
            let sum = prefix[r1.1 + 1] - prefix[r1.0];
            let norm = sum.norm_sq();
            let key = key_of(r1, r2);
            if norm > best.0 || (norm == best.0 && key < best_key) {
                best = (norm, sum, r1, r2);
                best_key = key;
            }
        }
    }
    best
}

fn all_runs(t: &DivisorTables) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..t.divisors.len() {
        for j in i..=t.run_end[i] {
            out.push((i, j));
        }
    }
    out
}

fn maximal_runs(t: &DivisorTables) -> Vec<(usize, usize)> {
    (0..t.divisors.len()).map(|i| (i, t.run_end[i])).collect()
}

/// Exact Δ₃(n, f): sup over all windows, computed over divisor-anchored runs.
pub fn delta3(n: u64, weights: DeltaWeights, chi: Option<&CubicCharacter>) -> Result<DeltaResult> {
    if n == 0 {
        return Err(Error::Validation("delta3(0) undefined".into()));
    }
    if n > 100_000_000 {
        return Err(Error::OracleScale(format!("delta3(n = {n}) beyond 10^8")));
    }
    let t = build_tables(n, weights, chi)?;
    // unit weights are nonnegative, so widening a window never decreases the
    // sum and maximal runs suffice; character sums need every sub-run
    let (ranges1, ranges2) = match weights {
        DeltaWeights::Unit => (maximal_runs(&t), maximal_runs(&t)),
        DeltaWeights::CharPair => (all_runs(&t), all_runs(&t)),
    };
    let (norm, value, r1, r2) = max_over_range_pairs(&t, &ranges1, &ranges2);
    Ok(DeltaResult { sup_norm_sq: norm, value, witness: t.witness(r1, r2) })
}

/// Exhaustive-run variant used to validate the unit-mode maximal-run
/// shortcut in tests.
pub fn delta3_all_runs(
    n: u64,
    weights: DeltaWeights,
    chi: Option<&CubicCharacter>,
) -> Result<DeltaResult> {
    let t = build_tables(n, weights, chi)?;
    let runs = all_runs(&t);
    let (norm, value, r1, r2) = max_over_range_pairs(&t, &runs, &runs);
    Ok(DeltaResult { sup_norm_sq: norm, value, witness: t.witness(r1, r2) })
}

/// Dense-grid oracle: both u and v range over a step grid, u on
/// [−1, log n], v on [0, 1]. A lower bound for the sup by construction.
///
/// Sampling v is required for faithfulness to the definition: unit-length
/// windows cannot isolate a short divisor run whose two neighbours sit
/// within a log-length-1 span of it (first seen at n = 60 against the
/// conductor-7 character, where the sup needs the run {5, 6} and a v = 1
/// window over it necessarily catches 4 or 10).
///
/// Window contents repeat across grid points, so distinct contents are
/// deduplicated before evaluation; the maximum is unchanged. With a shared
/// step, the window (u_k, u_k + l·step] has content [hi(k), hi(k+l) − 1]
/// where hi(m) counts the divisor logs ≤ u_m, so the reachable contents per
/// left-boundary class form contiguous sweeps of hi.
pub fn delta3_grid_oracle(
    n: u64,
    weights: DeltaWeights,
    chi: Option<&CubicCharacter>,
    grid_step: f64,
) -> Result<DeltaResult> {
    if n == 0 {
        return Err(Error::Validation("delta3(0) undefined".into()));
    }
    if n > 100_000 {
        return Err(Error::OracleScale(format!("grid oracle n = {n} beyond 10^5")));
    }
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(Error::OracleScale(format!("grid step {grid_step} must be in (0, 0.01]")));
    }
    let t = build_tables(n, weights, chi)?;
    let v_steps = (1.0 / grid_step).round() as usize;
    let u_len = (((n as f64).ln() + 1.0) / grid_step).ceil() as usize + 1;
    // hi[m] = #divisor logs ≤ −1 + m·step, over the extended grid
    let hi: Vec<usize> = (0..u_len + v_steps + 1)
        .map(|m| {
            let u = -1.0 + grid_step * m as f64;
            t.logs.partition_point(|&l| l <= u)
        })
        .collect();
    let mut contents: Vec<(usize, usize)> = Vec::new();
    let mut k = 0usize;
    while k < u_len {
        // left-boundary class [k, kb): all grid u with the same lo = hi[k]
        let lo = hi[k];
        let mut kb = k + 1;
        while kb < u_len && hi[kb] == lo {
            kb += 1;
        }
        // reachable right boundaries: hi[m] for m in [k, kb − 1 + v_steps]
        let mut last = usize::MAX;
        for m in k..(kb + v_steps).min(hi.len()) {
            let h = hi[m];
            if h > lo && h != last {
                contents.push((lo, h - 1));
                last = h;
            }
        }
        k = kb;
    }
    contents.sort_unstable();
    contents.dedup();
    if contents.is_empty() {
        contents.push((0, 0)); // n = 1: the single divisor
    }
    let (norm, value, r1, r2) = max_over_range_pairs(&t, &contents, &contents);
    Ok(DeltaResult { sup_norm_sq: norm, value, witness: t.witness(r1, r2) })
}

/// The oscillation exponent ρ = (1/2π)∫ max(1, |1+e^{it}|²) dt − 2,
/// integrated piecewise on the smooth arcs (|1+e^{it}|² = 2 + 2cos t crosses
/// 1 at t = 2π/3, 4π/3).
pub fn rho_exponent() -> f64 {
    use std::f64::consts::PI;
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let arc = |t: f64| 2.0 + 2.0 * t.cos();
    let i1 = simpson(&arc, 0.0, 2.0 * PI / 3.0, 1 << 12);
    let i2 = 2.0 * PI / 3.0; // the flat max(…) = 1 stretch
    let i3 = simpson(&arc, 4.0 * PI / 3.0, 2.0 * PI, 1 << 12);
    (i1 + i2 + i3) / (2.0 * PI) - 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentMode {
    /// Σ y^{ω(n)} Δ₃(n)
    Plain,
    /// Σ y^{ω(n)} Δ₃(n, χ, χ²)²
    CharSquared,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCheckpoint {
    pub x: u64,
    pub sum: f64,
    pub log_avg: f64,
    pub loglog_x: f64,
}

/// Diagnostic moment report: no pass/fail on the slope, which is only an
/// empirical shadow of the proven exponent bounds.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub schema: u32,
    pub x: u64,
    pub y: f64,
    pub mode: MomentMode,
    pub checkpoints: Vec<MomentCheckpoint>,
    /// least-squares slope of log(S/x) against log log x over the checkpoints
    pub fitted_slope: Option<f64>,
    pub predicted_exponent: f64,
    pub rho: f64,
}

/// Σ_{n ≤ x} y^{ω(n)}·Δ₃-weight with g = 1, plus the log–log slope
/// diagnostic against the predicted exponent.
pub fn moment_sum(
    x: u64,
    y: f64,
    chi: &CubicCharacter,
    mode: MomentMode,
) -> Result<MomentReport> {
    if x < 10 || x > 1_000_000 {
        return Err(Error::OracleScale(format!("moment_sum x = {x} outside [10, 10^6]")));
    }
    let rho = rho_exponent();
    let predicted_exponent = match mode {
        MomentMode::Plain => (y - 1.0).max(3.0 * y - 3.0),
        MomentMode::CharSquared => (y - 1.0).max((rho + 2.0) * y - 2.0).max(3.0 * y - 3.0),
    };
    let mut marks: Vec<u64> = (0..5).map(|i| x >> (4 - i)).filter(|&m| m >= 10).collect();
    marks.dedup();
    let mut checkpoints = Vec::new();
    let mut sum = 0.0f64;
    let mut next_mark = 0usize;
    for n in 1..=x {
        let f = factor(n)?;
        let weight = y.powi(f.omega() as i32);
        let term = match mode {
            MomentMode::Plain => {
                let d = delta3(n, DeltaWeights::Unit, None)?;
                weight * d.value.a as f64
            }
            MomentMode::CharSquared => {
                let d = delta3(n, DeltaWeights::CharPair, Some(chi))?;
                weight * d.sup_norm_sq as f64
            }
        };
        sum += term;
        while next_mark < marks.len() && n == marks[next_mark] {
            checkpoints.push(MomentCheckpoint {
                x: n,
                sum,
                log_avg: (sum / n as f64).ln(),
                loglog_x: (n as f64).ln().ln(),
            });
            next_mark += 1;
        }
    }
    let fitted_slope = (checkpoints.len() >= 2).then(|| {
        let n = checkpoints.len() as f64;
        let sx: f64 = checkpoints.iter().map(|c| c.loglog_x).sum();
        let sy: f64 = checkpoints.iter().map(|c| c.log_avg).sum();
        let sxx: f64 = checkpoints.iter().map(|c| c.loglog_x * c.loglog_x).sum();
        let sxy: f64 = checkpoints.iter().map(|c| c.loglog_x * c.log_avg).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    });
    Ok(MomentReport {
        schema: 1,
        x,
        y,
        mode,
        checkpoints,
        fitted_slope,
        predicted_exponent,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BuiltinField, CubicField};
    use rand::{Rng, SeedableRng};

    fn chi7() -> CubicCharacter {
        CubicCharacter::for_field(&CubicField::builtin(BuiltinField::Q7)).unwrap()
    }

    #[test]
    fn unit_small_values() {
        // n = 1: only the pair (1,1)
        assert_eq!(delta3(1, DeltaWeights::Unit, None).unwrap().sup_norm_sq, 1);
        // n = 2: both divisors fit one unit window (log 2 < 1), so all three
        // pairs (1,1),(1,2),(2,1) are caught at once
        assert_eq!(delta3(2, DeltaWeights::Unit, None).unwrap().value.a, 3);
        // n = p ≥ 3: no unit window contains both 1 and p
        for p in [3u64, 5, 7, 97] {
            assert_eq!(delta3(p, DeltaWeights::Unit, None).unwrap().value.a, 1, "p = {p}");
        }
    }

    #[test]
    fn unit_bounded_by_tau3_and_at_least_one() {
        for n in 1..=2000u64 {
            let d = delta3(n, DeltaWeights::Unit, None).unwrap();
            let t3 = factor(n).unwrap().tau3();
            assert!(d.value.a >= 1, "n = {n}");
            assert!((d.value.a as u64) <= t3, "n = {n}: {} > τ₃ = {t3}", d.value.a);
            assert_eq!(d.sup_norm_sq, (d.value.a as i128) * (d.value.a as i128));
        }
    }

    #[test]
    fn unit_fast_path_equals_all_runs() {
        for n in 1..=600u64 {
            let fast = delta3(n, DeltaWeights::Unit, None).unwrap();
            let full = delta3_all_runs(n, DeltaWeights::Unit, None).unwrap();
            assert_eq!(fast.sup_norm_sq, full.sup_norm_sq, "n = {n}");
        }
    }

    #[test]
    fn char_norm_below_unit_square() {
        let chi = chi7();
        for n in 1..=2000u64 {
            let u = delta3(n, DeltaWeights::Unit, None).unwrap().value.a as i128;
            let c = delta3(n, DeltaWeights::CharPair, Some(&chi)).unwrap().sup_norm_sq;
            assert!(c <= u * u, "n = {n}: {c} > {u}²");
        }
    }

    #[test]
    fn sweep_equals_grid_small_n_both_modes() {
        let chi = chi7();
        for n in 1..=300u64 {
            for (w, c) in [(DeltaWeights::Unit, None), (DeltaWeights::CharPair, Some(&chi))] {
                let sweep = delta3(n, w, c).unwrap();
                let grid = delta3_grid_oracle(n, w, c, 0.00025).unwrap();
                assert_eq!(sweep.sup_norm_sq, grid.sup_norm_sq, "n = {n}, {w:?}");
            }
        }
    }

    #[test]
    fn grid_never_exceeds_sweep_random_n() {
        let chi = chi7();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let n = rng.gen_range(1..=100_000u64);
            let sweep = delta3(n, DeltaWeights::CharPair, Some(&chi)).unwrap();
            let grid = delta3_grid_oracle(n, DeltaWeights::CharPair, Some(&chi), 0.01).unwrap();
            assert!(grid.sup_norm_sq <= sweep.sup_norm_sq, "n = {n}");
        }
    }

    #[test]
    fn witness_reproduces_value() {
        // recompute the window sum at the witness coordinates
        let chi = chi7();
        for n in [12u64, 360, 1001, 4620] {
            for (w, c) in [(DeltaWeights::Unit, None), (DeltaWeights::CharPair, Some(&chi))] {
                let d = delta3(n, w, c).unwrap();
                let wd = d.witness;
                assert!(wd.v1 >= 0.0 && wd.v1 <= 1.0 && wd.v2 >= 0.0 && wd.v2 <= 1.0);
                let divs = factor(n).unwrap().divisors();
                let mut acc = EisensteinInt::ZERO;
                for &d1 in &divs {
                    let l1 = (d1 as f64).ln();
                    if !(l1 > wd.u1 && l1 <= wd.u1 + wd.v1) {
                        continue;
                    }
                    for &d2 in &divs {
                        if (n / d1) % d2 != 0 {
                            continue;
                        }
                        let l2 = (d2 as f64).ln();
                        if l2 > wd.u2 && l2 <= wd.u2 + wd.v2 {
                            let term = match w {
                                DeltaWeights::Unit => EisensteinInt::ONE,
                                DeltaWeights::CharPair => {
                                    let chi = c.unwrap();
                                    chi.value(d1).to_eisenstein()
                                        * chi.value(d2).pow(2).to_eisenstein()
                                }
                            };
                            acc += term;
                        }
                    }
                }
                assert_eq!(acc, d.value, "n = {n}, {w:?}");
            }
        }
    }

    #[test]
    fn grid_resolution_near_e_ratios() {
        // 532 = 4·7·19 carries the near-e divisor ratio 38/14 = 19/7; the
        // optimal window spans log 0.99858 and needs a step under ~7e-4
        let sweep = delta3(532, DeltaWeights::Unit, None).unwrap();
        assert_eq!(sweep.value.a, 7);
        let coarse = delta3_grid_oracle(532, DeltaWeights::Unit, None, 0.005).unwrap();
        assert_eq!(coarse.value.a, 6, "coarse grid misses the {{14,19,28,38}} window");
        let fine = delta3_grid_oracle(532, DeltaWeights::Unit, None, 0.00025).unwrap();
        assert_eq!(fine.value.a, 7);
        // 60 needs a short (v < 1) window: {5,6} against the q7 character
        let chi = chi7();
        let sweep = delta3(60, DeltaWeights::CharPair, Some(&chi)).unwrap();
        assert_eq!(sweep.sup_norm_sq, 13);
        let grid = delta3_grid_oracle(60, DeltaWeights::CharPair, Some(&chi), 0.005).unwrap();
        assert_eq!(grid.sup_norm_sq, 13);
    }

    #[test]
    fn rho_matches_closed_form() {
        let rho = rho_exponent();
        let closed = 3f64.sqrt() / std::f64::consts::PI - 1.0 / 3.0;
        assert!((rho - closed).abs() < 1e-9, "rho = {rho}");
        assert!((rho - 0.21800).abs() < 2e-5, "rho = {rho}");
    }

    #[test]
    fn moment_sum_small_hand_check() {
        let chi = chi7();
        let rep = moment_sum(10, 1.0, &chi, MomentMode::Plain).unwrap();
        // Σ_{n≤10} Δ₃(n): recompute directly
        let mut expect = 0.0;
        for n in 1..=10u64 {
            expect += delta3(n, DeltaWeights::Unit, None).unwrap().value.a as f64;
        }
        let last = rep.checkpoints.last().unwrap();
        assert_eq!(last.x, 10);
        assert!((last.sum - expect).abs() < 1e-12);
        // predicted exponent at y = 1: plain max{0, 0} = 0
        assert_eq!(rep.predicted_exponent, 0.0);
        let rep2 = moment_sum(10, 1.0, &chi, MomentMode::CharSquared).unwrap();
        // char-squared at y = 1: max{0, ρ, 0} = ρ
        assert!((rep2.predicted_exponent - rep2.rho).abs() < 1e-15);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn delta_bounds_arbitrary_n(n in 1u64..50_000) {
            let chi = chi7();
            let unit = delta3(n, DeltaWeights::Unit, None).unwrap();
            let tau3 = factor(n).unwrap().tau3();
            proptest::prop_assert!(unit.value.a >= 1);
            proptest::prop_assert!(unit.value.a as u64 <= tau3);
            let char_sq = delta3(n, DeltaWeights::CharPair, Some(&chi)).unwrap().sup_norm_sq;
            proptest::prop_assert!(char_sq <= (unit.value.a as i128) * (unit.value.a as i128));
        }
    }

    #[test]
    fn oracle_scale_guards() {
        assert!(matches!(
            delta3(200_000_000, DeltaWeights::Unit, None),
            Err(Error::OracleScale(_))
        ));
        assert!(matches!(
            delta3_grid_oracle(200_000, DeltaWeights::Unit, None, 0.005),
            Err(Error::OracleScale(_))
        ));
        assert!(matches!(
            delta3_grid_oracle(100, DeltaWeights::Unit, None, 0.5),
            Err(Error::OracleScale(_))
        ));
    }
}
