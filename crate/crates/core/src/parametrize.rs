//! Decomposition machinery for the census sum: the branch index sets
//! W_{α,d₁,d₂}, the lattice maps U_{β,d₁,d₂}, transformed forms and regions,
//! and exact integer checks of the two decomposition identities
//!
//!   Q(F,ξ,R)  = Σ_{d | q^∞} Q₁(F, ξ/d, R)
//!   Q₁(F,ξ,R) = Σ_{d₁,α,d₂,β ∈ W} Q₂(F_{β,d₁,d₂}, ξ, R_{β,d₁,d₂})  (+ m = 0 column)
//!
//! Branch forms are F(U·x)/d₂: β ∈ W forces d₂ | F(d₁, β), and d₂ divides
//! the remaining coefficients through their d₂q factors, so division by d₂
//! is exact; r₃ is invariant under q-smooth scaling, so the identity value
//! is unchanged. Points (0, n) admit no branch tuple (they need a unit m₁);
//! their column is accounted separately and vanishes whenever r₃ kills the
//! values F(0, n).

use crate::arith::{factor, gcd_u64, inv_mod, mul_mod, pow_mod, r3, r3_of_factorization};
use crate::census::{lattice_sup_abs_form, RegionSpec};
use crate::character::{euler_phi, CubicCharacter};
use crate::congruence::{rho_plus, BinaryCubicForm};
use crate::error::{Error, Result};
use num::rational::Ratio;
use serde::Serialize;

/// W_{α,d₁,d₂}: residues β in [1, d₂q] coprime to rad(d₁) with
/// F(d₁, β) ≡ α·d₂ mod d₂q.
#[derive(Debug, Clone)]
pub struct WSet {
    pub alpha: u64,
    pub d1: u64,
    pub d2: u64,
    pub members: Vec<u64>,
}

const WSET_SCAN_CAP: u64 = 200_000_000;

/// Exhaustive member list by scanning β in [1, d₂q].
pub fn wset(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    alpha: u64,
    d1: u64,
    d2: u64,
) -> Result<WSet> {
    chi.check_q_smooth(d1).map_err(|_| Error::BadDivisor(d1, chi.modulus_q))?;
    chi.check_q_smooth(d2).map_err(|_| Error::BadDivisor(d2, chi.modulus_q))?;
    if !chi.kernel_g1.contains(&(alpha % chi.modulus_q)) {
        return Err(Error::Validation(format!("alpha = {alpha} not in G1")));
    }
    let q = chi.modulus_q;
    let d2q = d2.checked_mul(q).ok_or(Error::Overflow("d2*q"))?;
    if d2q > WSET_SCAN_CAP {
        return Err(Error::CapExceeded(format!("wset scan over {d2q} residues")));
    }
    let target = mul_mod(alpha % d2q, d2 % d2q, d2q);
    let rad_d1: Vec<u64> = chi.q_primes.iter().copied().filter(|&p| d1 % p == 0).collect();
    let d1_i = i64::try_from(d1).map_err(|_| Error::Overflow("d1"))?;
    let mut members = Vec::new();
    for beta in 1..=d2q {
        if rad_d1.iter().any(|&p| beta % p == 0) {
            continue;
        }
        if form.eval_mod(d1_i, beta as i64, d2q) == target {
            members.push(beta);
        }
    }
    Ok(WSet { alpha, d1, d2, members })
}

/// One branch of the parametrization: x = U_{β,d₁,d₂}(m₁, n₁) with
/// U = [[d₁, 0], [β, d₂q]], det U = d₁d₂q.
#[derive(Debug, Clone, Serialize)]
pub struct ParamBranch {
    pub alpha: u64,
    pub beta: u64,
    pub d1: u64,
    pub d2: u64,
    pub det: u128,
    /// coefficients of F(U(m,n))/d₂ in (m³, m²n, mn², n³) order
    pub transformed_form: [i128; 4],
}

/// Expanded coefficients of F(d₁m, βm + d₂q·n), divided exactly by d₂.
pub fn branch_form(
    form: &BinaryCubicForm,
    q: u64,
    beta: u64,
    d1: u64,
    d2: u64,
) -> Result<[i128; 4]> {
    let [a0, a1, a2, a3] = form.coeffs.map(|v| v as i128);
    let (d1, b, w) = (d1 as i128, beta as i128, (d2 as i128) * (q as i128));
    let ovf = || Error::Overflow("branch form coefficients");
    let m3 = a0
        .checked_mul(d1 * d1 * d1)
        .and_then(|v| v.checked_add(a1 * d1 * d1 * b))
        .and_then(|v| v.checked_add(a2 * d1 * b * b))
        .and_then(|v| v.checked_add(a3 * b * b * b))
        .ok_or_else(ovf)?;
    let m2n = w
        .checked_mul(a1 * d1 * d1 + 2 * a2 * d1 * b + 3 * a3 * b * b)
        .ok_or_else(ovf)?;
    let mn2 = w
        .checked_mul(w)
        .and_then(|v| v.checked_mul(a2 * d1 + 3 * a3 * b))
        .ok_or_else(ovf)?;
    let n3 = w
        .checked_mul(w)
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_mul(a3))
        .ok_or_else(ovf)?;
    let d2 = d2 as i128;
    for (name, c) in [("m3", m3), ("m2n", m2n), ("mn2", mn2), ("n3", n3)] {
        if c % d2 != 0 {
            return Err(Error::Validation(format!(
                "branch coefficient {name} = {c} not divisible by d2 = {d2}"
            )));
        }
    }
    Ok([m3 / d2, m2n / d2, mn2 / d2, n3 / d2])
}

pub fn param_branch(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    alpha: u64,
    beta: u64,
    d1: u64,
    d2: u64,
) -> Result<ParamBranch> {
    let q = chi.modulus_q;
    let transformed_form = branch_form(form, q, beta, d1, d2)?;
    Ok(ParamBranch {
        alpha,
        beta,
        d1,
        d2,
        det: d1 as u128 * d2 as u128 * q as u128,
        transformed_form,
    })
}

/// Q₁(F, ξ, R) = Σ_{x ∈ R(ξ)∩Z², gcd(m,n,q) = 1} r₃(|F(x)|).
pub fn q1_direct(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    region: &RegionSpec,
    xi: Ratio<i64>,
) -> Result<u64> {
    let q = chi.modulus_q;
    let mut total = 0u64;
    let b = region.x_bound(xi);
    for m in -b..=b {
        let Some(h) = region.row_half_width(m, xi) else { continue };
        for n in -h..=h {
            if m == 0 && n == 0 {
                continue;
            }
            if gcd_u64(gcd_u64(m.unsigned_abs(), n.unsigned_abs()), q) != 1 {
                continue;
            }
            let v = form.eval(m, n);
            if v == 0 {
                return Err(Error::ZeroValueEncountered(m, n));
            }
            let v = u64::try_from(v.unsigned_abs()).map_err(|_| Error::Overflow("form value"))?;
            total += r3_of_factorization(chi, &factor(v)?);
        }
    }
    Ok(total)
}

fn q_part(mut v: u64, q_primes: &[u64]) -> u64 {
    let mut part = 1u64;
    for &p in q_primes {
        while v % p == 0 {
            v /= p;
            part *= p;
        }
    }
    part
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub xi: String,
    /// Q(F,ξ,R) by direct scan
    pub q_direct: u64,
    /// Σ_{d | q^∞} Q₁(F, ξ/d, R)
    pub q_sum_over_dilations: u64,
    /// Q₁(F,ξ,R) by direct scan
    pub q1_direct: u64,
    /// Σ over branches of Q₂
    pub branch_sum: u64,
    /// Σ r₃ over the points (0, n) with (n, q) = 1, which the branch
    /// parametrization cannot reach; zero for the forms used in acceptance
    pub m_zero_column: u64,
    pub branches_total: usize,
    pub branches_nonzero: usize,
    pub d_cap: u64,
    pub d2_cap: u64,
}

impl DecompositionReport {
    pub fn dilation_identity_holds(&self) -> bool {
        self.q_direct == self.q_sum_over_dilations
    }
    pub fn branch_identity_holds(&self) -> bool {
        self.q1_direct == self.branch_sum + self.m_zero_column
    }
}

/// Verify both decomposition identities by exact counting.
///
/// Truncations are provable, not heuristic: d and d₁ beyond the coordinate
/// bound leave no nonzero lattice point; d₂ runs over the q-parts actually
/// realized by |F| on R(ξ) (every preimage point of a branch with index d₂
/// has q-part exactly d₂, which is asserted during the scan).
pub fn q_decomposition_check(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    region: &RegionSpec,
    xi: Ratio<i64>,
) -> Result<DecompositionReport> {
    if xi > Ratio::new(200, 1) {
        return Err(Error::OracleScale(format!("decomposition check at xi = {xi} > 200")));
    }
    let q = chi.modulus_q;

    // direct Q and the realized q-parts of |F| on R(ξ)
    let mut q_direct = 0u64;
    let mut realized_d2: Vec<u64> = Vec::new();
    let b = region.x_bound(xi);
    for m in -b..=b {
        let Some(h) = region.row_half_width(m, xi) else { continue };
        for n in -h..=h {
            if m == 0 && n == 0 {
                continue;
            }
            let v = form.eval(m, n);
            if v == 0 {
                return Err(Error::ZeroValueEncountered(m, n));
            }
            let v = u64::try_from(v.unsigned_abs()).map_err(|_| Error::Overflow("form value"))?;
            q_direct += r3_of_factorization(chi, &factor(v)?);
            realized_d2.push(q_part(v, &chi.q_primes));
        }
    }
    realized_d2.sort_unstable();
    realized_d2.dedup();

    // identity (i): Q(ξ) = Σ_{d | q^∞, d ≤ coordinate bound} Q₁(ξ/d)
    let d_cap = region.x_bound(xi).max(region.y_bound(xi)) as u64;
    let mut q_sum_over_dilations = 0u64;
    for d in chi.q_smooth_divisors(d_cap) {
        let scaled = Ratio::new(*xi.numer(), xi.denom().checked_mul(d as i64).ok_or(Error::Overflow("xi/d"))?);
        q_sum_over_dilations += q1_direct(form, chi, region, scaled)?;
    }

    // identity (ii) at ξ
    let q1 = q1_direct(form, chi, region, xi)?;
    let mut branch_sum = 0u64;
    let mut branches_total = 0usize;
    let mut branches_nonzero = 0usize;
    let d1_cap = region.x_bound(xi) as u64;
    let sup_abs = lattice_sup_abs_form(form, region, xi);
    let d2_cap = u64::try_from(sup_abs.min(u64::MAX as u128)).unwrap();
    for d1 in chi.q_smooth_divisors(d1_cap) {
        let m1_bound = region.x_bound(xi) / d1 as i64;
        for &alpha in &chi.kernel_g1 {
            for &d2 in &realized_d2 {
                let w = wset(form, chi, alpha, d1, d2)?;
                let d2q = d2 * q;
                for &beta in &w.members {
                    branches_total += 1;
                    // branch integrality: construct the transformed form
                    let branch = param_branch(form, chi, alpha, beta, d1, d2)?;
                    debug_assert_eq!(branch.det, d1 as u128 * d2 as u128 * q as u128);
                    let mut q2 = 0u64;
                    for m1 in -m1_bound..=m1_bound {
                        if gcd_u64(m1.unsigned_abs() % q, q) != 1 {
                            continue;
                        }
                        let m = d1 as i64 * m1;
                        let Some(h) = region.row_half_width(m, xi) else { continue };
                        // second coordinate y = β·m₁ + d₂q·n₁ ∈ [−h, h]
                        let base = beta as i128 * m1 as i128;
                        let step = d2q as i128;
                        let lo = (-(h as i128) - base).div_euclid(step)
                            + i128::from((-(h as i128) - base).rem_euclid(step) != 0);
                        let hi = ((h as i128) - base).div_euclid(step);
                        for n1 in lo..=hi {
                            let y = base + step * n1;
                            let y64 = i64::try_from(y).map_err(|_| Error::Overflow("branch point"))?;
                            debug_assert!(region.contains(m, y64, xi));
                            let v = form.eval(m, y64);
                            assert_ne!(v, 0);
                            let av = u64::try_from(v.unsigned_abs())
                                .map_err(|_| Error::Overflow("form value"))?;
                            // the q-part of any branch preimage value is d₂
                            assert_eq!(q_part(av, &chi.q_primes), d2, "branch q-part mismatch");
                            debug_assert_eq!(av % d2, 0);
                            q2 += r3(chi, av / d2)?;
                        }
                    }
                    if q2 > 0 {
                        branches_nonzero += 1;
                    }
                    branch_sum += q2;
                }
            }
        }
    }

    // the points (0, ±n) with (n, q) = 1 lie outside the parametrization
    let mut m_zero_column = 0u64;
    if let Some(h) = region.row_half_width(0, xi) {
        for n in -h..=h {
            if n == 0 || gcd_u64(n.unsigned_abs(), q) != 1 {
                continue;
            }
            let v = form.eval(0, n);
            if v == 0 {
                return Err(Error::ZeroValueEncountered(0, n));
            }
            m_zero_column += r3(chi, u64::try_from(v.unsigned_abs()).unwrap())?;
        }
    }

    Ok(DecompositionReport {
        xi: xi.to_string(),
        q_direct,
        q_sum_over_dilations,
        q1_direct: q1,
        branch_sum,
        m_zero_column,
        branches_total,
        branches_nonzero,
        d_cap,
        d2_cap,
    })
}

/// Every point of Q₁ with r₃ ≠ 0 and m ≠ 0 is reproduced by exactly one
/// (d₁, α, d₂, β, m₁, n₁) tuple; checked exhaustively.
pub fn unique_parametrization_check(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    region: &RegionSpec,
    xi: Ratio<i64>,
) -> Result<u64> {
    if xi > Ratio::new(20, 1) {
        return Err(Error::OracleScale("uniqueness check is exhaustive, xi ≤ 20".into()));
    }
    let q = chi.modulus_q;
    let mut checked = 0u64;
    let b = region.x_bound(xi);
    for m in -b..=b {
        let Some(h) = region.row_half_width(m, xi) else { continue };
        for n in -h..=h {
            if (m == 0 && n == 0)
                || gcd_u64(gcd_u64(m.unsigned_abs(), n.unsigned_abs()), q) != 1
            {
                continue;
            }
            let v = form.eval(m, n);
            assert_ne!(v, 0);
            let av = u64::try_from(v.unsigned_abs()).unwrap();
            if r3(chi, av)? == 0 || m == 0 {
                continue;
            }
            // reconstruct the tuple
            let d1 = q_part(m.unsigned_abs(), &chi.q_primes);
            let m1 = m / d1 as i64;
            let d2 = q_part(av, &chi.q_primes);
            let d2q = d2 * q;
            let m1_mod = m1.rem_euclid(q as i64) as u64;
            let m1_cubed_inv = inv_mod(pow_mod(m1_mod, 3, q), q).expect("m1 unit mod q");
            // F(x)/d₂ mod q, respecting the sign of F(x)
            let f_over_d2 = (v / d2 as i128).rem_euclid(q as i128) as u64;
            let alpha = mul_mod(f_over_d2, m1_cubed_inv, q);
            assert!(chi.kernel_g1.contains(&alpha), "alpha not in G1 at ({m},{n})");
            let m1_inv_d2q =
                inv_mod(m1.rem_euclid(d2q as i64) as u64, d2q).expect("m1 unit mod d2q");
            let mut beta = mul_mod(n.rem_euclid(d2q as i64) as u64, m1_inv_d2q, d2q);
            if beta == 0 {
                beta = d2q;
            }
            // membership and exact reproduction
            let w = wset(form, chi, alpha, d1, d2)?;
            assert!(w.members.contains(&beta), "beta not in W at ({m},{n})");
            let n1 = (n as i128 - beta as i128 * m1 as i128) / d2q as i128;
            assert_eq!(
                n as i128,
                beta as i128 * m1 as i128 + d2q as i128 * n1,
                "n1 not integral at ({m},{n})"
            );
            // count reproductions over every admissible branch
            let mut reproductions = 0u32;
            for d1_c in chi.q_smooth_divisors(m.unsigned_abs()) {
                if m % d1_c as i64 != 0 {
                    continue;
                }
                let m1_c = m / d1_c as i64;
                if gcd_u64(m1_c.unsigned_abs() % q, q) != 1 {
                    continue;
                }
                for &alpha_c in &chi.kernel_g1 {
                    for d2_c in chi.q_smooth_divisors(av) {
                        if av % d2_c != 0 {
                            continue;
                        }
                        let w_c = wset(form, chi, alpha_c, d1_c, d2_c)?;
                        for &beta_c in &w_c.members {
                            let rem = n as i128 - beta_c as i128 * m1_c as i128;
                            if rem.rem_euclid((d2_c * q) as i128) == 0 {
                                reproductions += 1;
                            }
                        }
                    }
                }
            }
            assert_eq!(reproductions, 1, "point ({m},{n}) reproduced {reproductions} times");
            checked += 1;
        }
    }
    Ok(checked)
}

/// |W_{α,d₁,d₂}| depends on d₁ only through d₃ = (d₁, d₂q).
pub fn chinois_invariance_check(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    d1_list: &[u64],
    d2_cap_exp: u32,
) -> Result<bool> {
    let q = chi.modulus_q;
    let d2_bound = q.pow(d2_cap_exp);
    for d2 in chi.q_smooth_divisors(d2_bound) {
        for &alpha in &chi.kernel_g1 {
            for &d1 in d1_list {
                let d3 = gcd_u64(d1, d2 * q);
                let a = wset(form, chi, alpha, d1, d2)?.members.len();
                let b = wset(form, chi, alpha, d3, d2)?.members.len();
                if a != b {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Σ_{d₃ | d₂q} φ(d₂q/d₃)·|W_{α,d₃,d₂}| ≤ q²·ρ_F⁺(d₂), for each α.
pub fn w_sum_inequality_check(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    d2: u64,
) -> Result<bool> {
    let q = chi.modulus_q;
    let d2q = d2 * q;
    let rhs = (q as u128) * (q as u128) * rho_plus(form, d2)? as u128;
    for &alpha in &chi.kernel_g1 {
        let mut lhs: u128 = 0;
        for d3 in factor(d2q)?.divisors() {
            let w = wset(form, chi, alpha, d3, d2)?;
            lhs += euler_phi(d2q / d3) as u128 * w.members.len() as u128;
        }
        if lhs > rhs {
            return Ok(false);
        }
    }
    Ok(true)
}
