//! Local densities: K_p(F) at primes away from the conductor, K_q(F) by the
//! limit route and by the W-sum route, the geometric density K_pg(F), and
//! the assembled constant K(F) = K_q(F)·Π K_p(F).
//!
//! All counting inside the W-sums and S-counts is exact rational; floats
//! appear only at report assembly. Tail estimates follow the geometric decay
//! of the truncated variables and are heuristic by design.

use crate::arith::chi_conv_pk;
use crate::character::{ChiValue, CubicCharacter, LValueProduct};
use crate::congruence::{
    h4_check, s_count_closed, s_count_table, BinaryCubicForm,
};
use crate::error::{Error, Result};
use crate::field::CubicField;
use crate::parametrize::wset;
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

type Rat = BigRational;

fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

fn rat_frac(n: u64, d: u64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

fn pow_rat(p: u64, e: u32) -> Rat {
    Rat::from_integer(BigInt::from(p).pow(e))
}

/// t_ν = ρ_F⁺(p^ν)/p^{2ν} as exact rationals for ν = 0..=depth.
fn t_sequence_exact(form: &BinaryCubicForm, p: u64, depth: u32) -> Result<Vec<Rat>> {
    let mut out = Vec::with_capacity(depth as usize + 1);
    for nu in 0..=depth {
        let rp = rho_plus_big(form, p, nu)?;
        out.push(Rat::new(rp, BigInt::from(p).pow(2 * nu)));
    }
    Ok(out)
}

/// ρ⁺(p^ν) in big integers (the recursion stays exact even when u64 would
/// overflow at large depth).
fn rho_plus_big(form: &BinaryCubicForm, p: u64, nu: u32) -> Result<BigInt> {
    if nu == 0 {
        return Ok(BigInt::one());
    }
    let star = BigInt::from(crate::congruence::rho_star_pp(form, p, nu)?);
    let imprimitive = match nu {
        1 => BigInt::one(),
        2 => BigInt::from(p) * BigInt::from(p),
        _ => BigInt::from(p).pow(4) * rho_plus_big(form, p, nu - 3)?,
    };
    Ok(star + imprimitive)
}

/// The real prefactor (1 − χ(p)/p)(1 − χ²(p)/p): split (1−1/p)², otherwise
/// 1 + 1/p + 1/p².
fn kp_prefactor_exact(chi: &CubicCharacter, p: u64) -> Rat {
    if chi.value(p) == ChiValue::One {
        let t = rat_int(1) - rat_frac(1, p);
        t.clone() * t
    } else {
        rat_int(1) + rat_frac(1, p) + rat_frac(1, p * p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KpResult {
    pub p: u64,
    pub split: bool,
    pub value: f64,
    pub truncation_nu: u32,
    /// heuristic geometric bound on the dropped tail
    pub tail_estimate: f64,
}

/// K_p(F) = prefactor · Σ_ν ρ⁺(p^ν)p^{−2ν}(χ*χ²)(p^ν), truncated when three
/// consecutive terms fall below `tol` and ν ≥ 6 (the convolution has a
/// period-3 zero pattern, so a single small term proves nothing).
pub fn kp(form: &BinaryCubicForm, chi: &CubicCharacter, p: u64, tol: f64) -> Result<KpResult> {
    if chi.modulus_q % p == 0 {
        return Err(Error::RamifiedPrime(p));
    }
    let split = chi.value(p) == ChiValue::One;
    let pref = kp_prefactor_exact(chi, p).to_f64().unwrap();
    let mut sum = 0.0f64;
    let mut small_streak = 0u32;
    let mut nu = 0u32;
    let mut last_terms = [0.0f64; 3];
    // t_ν = ρ⁺(p^ν)/p^{2ν} by the primitive/imprimitive recursion
    // t_ν = ρ*(p^ν)/p^{2ν} + t_{max(ν−3,0)}/p², in floating point with the
    // stabilized projective counts (exact up to rounding)
    let mut t_seq: Vec<f64> = Vec::new();
    loop {
        let t_nu = if nu == 0 {
            1.0
        } else {
            let star = crate::congruence::proj_roots_pp(form, p, nu)? as f64
                * (1.0 - 1.0 / p as f64)
                / (p as f64).powi(nu as i32);
            star + t_seq[nu.saturating_sub(3) as usize] / (p as f64 * p as f64)
        };
        t_seq.push(t_nu);
        let term = t_nu * chi_conv_pk(chi, p, nu) as f64;
        sum += term;
        last_terms[(nu % 3) as usize] = term.abs();
        if term.abs() < tol {
            small_streak += 1;
        } else {
            small_streak = 0;
        }
        if small_streak >= 3 && nu >= 6 {
            break;
        }
        nu += 1;
        if nu > 400 {
            return Err(Error::CapExceeded(format!("K_p series at p = {p} past 400 terms")));
        }
    }
    let tail_estimate = pref * last_terms.iter().sum::<f64>() * p as f64 / (p as f64 - 1.0);
    Ok(KpResult { p, split, value: pref * sum, truncation_nu: nu, tail_estimate })
}

/// Exact partial sum prefactor·Σ_{ν ≤ depth} t_ν (χ*χ²)(p^ν).
pub fn kp_exact_partial(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    p: u64,
    depth: u32,
) -> Result<Rat> {
    if chi.modulus_q % p == 0 {
        return Err(Error::RamifiedPrime(p));
    }
    let pref = kp_prefactor_exact(chi, p);
    let t = t_sequence_exact(form, p, depth)?;
    let mut acc = Rat::zero();
    for (nu, t_nu) in t.iter().enumerate() {
        acc += t_nu * rat_int(chi_conv_pk(chi, p, nu as u32));
    }
    Ok(pref * acc)
}

/// Exact K_pg partial at depth k through the closed S-counts:
/// (1/p^{4k})·Σ_{x mod p^k} S(F(x), p^k), stratified by v_p(F(x)).
pub fn kpg_stratified_exact(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    p: u64,
    k: u32,
) -> Result<Rat> {
    if chi.modulus_q % p == 0 {
        return Err(Error::RamifiedPrime(p));
    }
    let t = t_sequence_exact(form, p, k)?;
    let scale = pow_rat(p, 2 * k); // N_v/p^{2k} = t_v − t_{v+1}, strata scaled by p^{2k}
    let mut acc = Rat::zero();
    for v in 0..k {
        let stratum = &t[v as usize] - &t[v as usize + 1];
        let s_closed = Rat::from_integer(BigInt::from(s_count_closed(chi, p, k, v)?));
        acc += stratum * s_closed;
    }
    let s_top = Rat::from_integer(BigInt::from(s_count_closed(chi, p, k, k)?));
    acc += &t[k as usize] * s_top;
    // divide by p^{4k}: strata already carry p^{−2k}, S still carries p^{2k}-size
    Ok(acc / scale)
}

/// Geometric K_pg partial at depth k by exhaustive norm-form tables:
/// counts (x, y, z, t) in (Z/p^k)⁵ with F(x) ≡ P(y,z,t) via the S-table
/// contraction. Fully independent of the closed S-counts.
pub fn kpg_brute(
    field: &CubicField,
    form: &BinaryCubicForm,
    p: u64,
    k: u32,
) -> Result<(f64, Rat)> {
    let pk = {
        let mut acc = 1u64;
        for _ in 0..k {
            acc = acc.checked_mul(p).ok_or(Error::Overflow("p^k"))?;
        }
        acc
    };
    if (pk as u128).pow(3) > 100_000_000 {
        return Err(Error::Budget(format!("kpg_brute p^{{3k}} = {p}^{} too large", 3 * k)));
    }
    let table = s_count_table(field, p, k)?;
    let mut total: u128 = 0;
    for m in 0..pk {
        for n in 0..pk {
            let v = form.eval_mod(m as i64, n as i64, pk);
            total += table[v as usize] as u128;
        }
    }
    let exact = Rat::new(BigInt::from(total), BigInt::from(p).pow(4 * k));
    Ok((exact.to_f64().unwrap(), exact))
}

/// Raw five-fold loop for tiny cases; validates the S-table contraction.
pub fn kpg_brute_raw(
    field: &CubicField,
    form: &BinaryCubicForm,
    p: u64,
    k: u32,
) -> Result<Rat> {
    let pk = p.pow(k);
    if (pk as u128).pow(5) > 50_000_000 {
        return Err(Error::Budget("kpg_brute_raw 5-fold loop too large".into()));
    }
    let mut total: u128 = 0;
    for m in 0..pk {
        for n in 0..pk {
            let fv = form.eval_mod(m as i64, n as i64, pk);
            for y in 0..pk {
                for z in 0..pk {
                    for t in 0..pk {
                        if field.norm_form.eval_mod(y, z, t, pk) == fv {
                            total += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(Rat::new(BigInt::from(total), BigInt::from(p).pow(4 * k)))
}

/// Heuristic distance from the depth-k K_pg partial to the limit, from the
/// Cauchy differences of the exact stratified sequence.
pub fn kpg_tail_estimate(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    p: u64,
    k: u32,
) -> Result<f64> {
    let a = kpg_stratified_exact(form, chi, p, k)?;
    let b = kpg_stratified_exact(form, chi, p, k + 3)?;
    Ok(3.0 * (b - a).abs().to_f64().unwrap() + 1e-15)
}

#[derive(Debug, Clone, Serialize)]
pub struct KqLimitStep {
    pub k: u32,
    pub count: u64,
    pub value: f64,
    /// 3·Σ_{p|q} ρ⁺(p^{k·v_p(q)})/p^{2k·v_p(q)}: the consecutive-step bound
    pub step_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KqLimitResult {
    pub per_k: Vec<KqLimitStep>,
    /// heuristic distance to the limit from the final step bound
    pub tail_estimate: f64,
}

const KQ_LIMIT_BUDGET: u128 = 1_000_000_000;

/// K_q(F) by the limit route: (3/q^{2k})·#{x mod q^k : F(x) ∈ ℰ_{q^k}} for
/// k = 1..k_max. Demoted to a verification oracle; the W-sum route is the
/// production value.
pub fn kq_limit(form: &BinaryCubicForm, chi: &CubicCharacter, k_max: u32) -> Result<KqLimitResult> {
    let q = chi.modulus_q;
    if (q as u128).pow(2 * k_max) > KQ_LIMIT_BUDGET {
        return Err(Error::Budget(format!("kq_limit q^{{2k}} with q = {q}, k = {k_max}")));
    }
    let mut per_k = Vec::new();
    for k in 1..=k_max {
        let qk = q.pow(k);
        let eps = chi.epsilon_set(qk)?;
        let count: u64 = (0..qk)
            .into_par_iter()
            .map(|m| {
                (0..qk)
                    .filter(|&n| eps.contains(form.eval_mod(m as i64, n as i64, qk)))
                    .count() as u64
            })
            .sum();
        let value = 3.0 * count as f64 / (qk as f64 * qk as f64);
        let mut step_bound = 0.0f64;
        for &p in &chi.q_primes {
            let mut vpq = 0u32;
            let mut m = q;
            while m % p == 0 {
                vpq += 1;
                m /= p;
            }
            let a = k * vpq;
            let t = {
                let rp = rho_plus_big(form, p, a)?;
                Rat::new(rp, BigInt::from(p).pow(2 * a)).to_f64().unwrap()
            };
            step_bound += 3.0 * t;
        }
        per_k.push(KqLimitStep { k, count, value, step_bound });
    }
    let tail_estimate = per_k.last().map(|s| 2.0 * s.step_bound).unwrap_or(0.0);
    Ok(KqLimitResult { per_k, tail_estimate })
}

/// q^∞ divisors with every prime exponent ≤ cap.
fn q_smooth_by_exponent(chi: &CubicCharacter, cap: u32) -> Vec<u64> {
    let mut out = vec![1u64];
    for &p in &chi.q_primes {
        let len = out.len();
        for i in 0..len {
            let mut v = out[i];
            for _ in 0..cap {
                match v.checked_mul(p) {
                    Some(next) => {
                        v = next;
                        out.push(v);
                    }
                    None => break,
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct KqWsumResult {
    pub value: f64,
    pub cap: u32,
    /// exact remainders of the d and d₁ sums plus a heuristic geometric
    /// bound for the d₂ tail
    pub tail_bound: f64,
}

/// K_q(F) by the W-sum route:
/// (3φ(q)/q²)·Σ_d d^{−2} Σ_{d₁} Σ_α Σ_{d₂} |W_{α,d₁,d₂}|/(d₁d₂),
/// every prime exponent capped at `cap`. |W| is cached on (α, d₃, d₂) since
/// it depends on d₁ only through d₃ = (d₁, d₂q).
pub fn kq_wsum(form: &BinaryCubicForm, chi: &CubicCharacter, cap: u32) -> Result<KqWsumResult> {
    let q = chi.modulus_q;
    let mut w_cache: HashMap<(u64, u64, u64), u64> = HashMap::new();
    let mut w_size = |alpha: u64, d1: u64, d2: u64| -> Result<u64> {
        let d3 = crate::arith::gcd_u64(d1, d2 * q);
        if let Some(&n) = w_cache.get(&(alpha, d3, d2)) {
            return Ok(n);
        }
        let n = wset(form, chi, alpha, d3, d2)?.members.len() as u64;
        w_cache.insert((alpha, d3, d2), n);
        Ok(n)
    };

    let divisors = q_smooth_by_exponent(chi, cap);
    // inner(d₂) = Σ_{d₁ ≤ cap} Σ_α |W|/d₁, exact; also the full d₁-sum via
    // the grouped closed form, making the d₁ remainder exact
    let mut inner_partial = Rat::zero();
    let mut inner_full = Rat::zero();
    for &d2 in &divisors {
        let mut part = Rat::zero();
        for &d1 in &divisors {
            for &alpha in &chi.kernel_g1.clone() {
                let w = w_size(alpha, d1, d2)?;
                if w > 0 {
                    part += rat_frac(w, 1) / rat_int(d1 as i64);
                }
            }
        }
        // full: group by d₃ | d₂q with the exact geometric factor
        let mut full = Rat::zero();
        for d3 in crate::arith::factor(d2 * q)?.divisors() {
            let mut geom = Rat::one();
            for &p in &chi.q_primes {
                let mut a = 0u32;
                let mut x = d3;
                while x % p == 0 {
                    a += 1;
                    x /= p;
                }
                let mut aa = 0u32;
                let mut y = d2 * q;
                while y % p == 0 {
                    aa += 1;
                    y /= p;
                }
                let base = pow_rat(p, a).recip();
                geom *= if a < aa {
                    base
                } else {
                    base * rat_frac(p, p - 1)
                };
            }
            for &alpha in &chi.kernel_g1.clone() {
                let w = w_size(alpha, d3, d2)?;
                if w > 0 {
                    full += rat_frac(w, 1) * geom.clone();
                }
            }
        }
        let d2_rat = rat_int(d2 as i64);
        inner_partial += part / d2_rat.clone();
        inner_full += full / d2_rat;
    }

    let phi_q = chi.phi_q();
    // the d-sum factors out: Σ_{d ≤ cap} d^{−2} and its exact full value
    let mut d_partial = Rat::zero();
    for &d in &divisors {
        d_partial += (rat_int(d as i64) * rat_int(d as i64)).recip();
    }
    let mut d_full = Rat::one();
    for &p in &chi.q_primes {
        d_full *= rat_frac(p * p, p * p - 1);
    }

    let front = rat_frac(3 * phi_q, 1) / rat_frac(q * q, 1);
    let value_rat = front.clone() * d_partial.clone() * inner_partial.clone();

    // exact remainders for d and d₁; heuristic geometric estimate for d₂
    let d_remainder = (&d_full - &d_partial) * inner_full.clone();
    let d1_remainder = d_full.clone() * (&inner_full - &inner_partial);
    let d2_tail = {
        // contribution of the top-exponent d₂ shell, extrapolated; the
        // grouped d₁-sum is at most Σ |W|/d₃ times Π p/(p−1) = q/φ(q)
        let overcount = rat_frac(q, 1) / rat_frac(phi_q, 1);
        let mut shell = Rat::zero();
        for &d2 in &divisors {
            if chi.q_primes.iter().all(|&p| d2 % p.pow(cap) != 0) {
                continue;
            }
            let mut full = Rat::zero();
            for d3 in crate::arith::factor(d2 * q)?.divisors() {
                for &alpha in &chi.kernel_g1.clone() {
                    let w = w_size(alpha, d3, d2)?;
                    if w > 0 {
                        full += rat_frac(w, 1) / rat_int(d3 as i64) * overcount.clone();
                    }
                }
            }
            shell += full / rat_int(d2 as i64);
        }
        let p_min = *chi.q_primes.iter().min().unwrap() as f64;
        let r = 1.0 / p_min;
        shell.to_f64().unwrap() * r / (1.0 - r)
    };
    let tail_bound = (front.clone() * (d_remainder + d1_remainder)).to_f64().unwrap()
        + front.to_f64().unwrap() * d_full.to_f64().unwrap() * d2_tail;

    Ok(KqWsumResult { value: value_rat.to_f64().unwrap(), cap, tail_bound })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub schema: u32,
    pub conductor_q: u64,
    pub form: [i64; 4],
    pub p_max: u64,
    pub kp_rows: Vec<KpResult>,
    pub kq_wsum: KqWsumResult,
    pub kq_limit: Option<KqLimitResult>,
    /// production K_q value (the W-sum route)
    pub kq_value: f64,
    pub k_total: f64,
    /// |1 − K(P_max)/K(P_max/2)|: partial-product stability across a halving
    pub euler_stability: f64,
    pub l_product: f64,
}

/// Assemble K(F) = K_q(F)·Π_{p ≤ p_max, p ∤ q} K_p(F).
#[allow(clippy::too_many_arguments)]
pub fn k_total(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    field: &CubicField,
    p_max: u64,
    tol: f64,
    kq_cap: u32,
    kq_limit_kmax: Option<u32>,
    l_product: &LValueProduct,
) -> Result<DensityReport> {
    h4_check(form, field, chi)?;
    let q = chi.modulus_q;
    let wsum = kq_wsum(form, chi, kq_cap)?;
    let limit = match kq_limit_kmax {
        Some(k) => Some(kq_limit(form, chi, k)?),
        None => None,
    };
    let mut kp_rows = Vec::new();
    let mut product = 1.0f64;
    let mut product_half = 1.0f64;
    for p in crate::arith::primes_up_to(p_max) {
        if q % p == 0 {
            continue;
        }
        let row = kp(form, chi, p, tol)?;
        product *= row.value;
        if p <= p_max / 2 {
            product_half *= row.value;
        }
        kp_rows.push(row);
    }
    let k_total = wsum.value * product;
    let k_half = wsum.value * product_half;
    let euler_stability = if k_half != 0.0 { (1.0 - k_total / k_half).abs() } else { f64::NAN };
    Ok(DensityReport {
        schema: 1,
        conductor_q: q,
        form: form.coeffs,
        p_max,
        kp_rows,
        kq_wsum: wsum.clone(),
        kq_limit: limit,
        kq_value: wsum.value,
        k_total,
        euler_stability,
        l_product: l_product.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::character::l_value_product;
    use crate::congruence::rho_plus_pp;
    use crate::field::BuiltinField;

    fn setup() -> (CubicField, CubicCharacter, BinaryCubicForm) {
        let field = CubicField::builtin(BuiltinField::Q7);
        let chi = CubicCharacter::for_field(&field).unwrap();
        let form = BinaryCubicForm::new([1, 0, 0, 2]).unwrap();
        (field, chi, form)
    }

    #[test]
    fn kp_prefactors() {
        let (_, chi, _) = setup();
        // non-split p = 2 wrt q = 7
        assert_eq!(kp_prefactor_exact(&chi, 2), rat_frac(7, 4));
        // split p = 13: (1 − 1/13)² = 144/169
        assert_eq!(kp_prefactor_exact(&chi, 13), rat_frac(144, 169));
    }

    #[test]
    fn kp_series_leading_terms_nonsplit_generic() {
        // p non-split, ρ⁻(p) = 0, p ∤ a₀𝒟(F): series = 1 − 1/p² + 1/p² − …
        // partial checks against the exact route
        let (_, chi, form) = setup();
        // p = 5: −2 is a cube mod 5? cubing bijective mod 5, one root → ρ⁻ = 1.
        // use p = 11 (11 ≡ 4 mod 7, non-split wrt q7): x³+2 mod 11 roots: 11 ≡ 2 mod 3
        // makes cubing bijective → 1 root. p = 13 is split. take p = 3: x³+2 ≡ (x+2)³? ρ⁻(3) = 1.
        // generic-shape assertion: exact partial at depth 1 = pref·(1 − ρ⁺(p)/p²)
        for p in [3u64, 5, 11] {
            let exact = kp_exact_partial(&form, &chi, p, 1).unwrap();
            let rp = rho_plus_pp(&form, p, 1).unwrap();
            let expect = kp_prefactor_exact(&chi, p)
                * (rat_int(1) - rat_frac(rp, 1) / rat_frac(p * p, 1));
            assert_eq!(exact, expect, "p = {p}");
        }
    }

    #[test]
    fn kp_converges_and_positive() {
        let (_, chi, form) = setup();
        for p in [2u64, 3, 5, 11, 13, 29, 41] {
            let r = kp(&form, &chi, p, 1e-12).unwrap();
            assert!(r.value > 0.0, "p = {p}: {}", r.value);
            assert!(r.truncation_nu >= 6);
            // crude sanity band
            let bound = 3.0 * (1.0 + 1.0 / p as f64 + 1.0 / (p * p) as f64);
            assert!(r.value < bound);
        }
        assert!(matches!(kp(&form, &chi, 7, 1e-10), Err(Error::RamifiedPrime(7))));
    }

    #[test]
    fn kpg_contraction_matches_raw_loop() {
        let (field, _, form) = setup();
        for (p, k) in [(2u64, 1u32), (3, 1), (5, 1), (2, 2)] {
            let via_table = kpg_brute(&field, &form, p, k).unwrap().1;
            let raw = kpg_brute_raw(&field, &form, p, k).unwrap();
            assert_eq!(via_table, raw, "p={p} k={k}");
        }
    }

    #[test]
    fn kpg_brute_matches_stratified_closed() {
        // geometric norm-form counting against the closed S stratification
        let (field, chi, form) = setup();
        for (p, k) in [(2u64, 1u32), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1), (5, 2), (13, 1), (13, 2)] {
            let brute = kpg_brute(&field, &form, p, k).unwrap().1;
            let strat = kpg_stratified_exact(&form, &chi, p, k).unwrap();
            assert_eq!(brute, strat, "p={p} k={k}");
        }
    }

    #[test]
    fn kpg_matched_depth_identities() {
        // non-split, 3 | k: strat(k) = partial(k−1) + t_k
        let (_, chi, form) = setup();
        for p in [2u64, 3, 5] {
            for k in [3u32, 6] {
                let lhs = kpg_stratified_exact(&form, &chi, p, k).unwrap();
                let partial = kp_exact_partial(&form, &chi, p, k - 1).unwrap();
                let t = t_sequence_exact(&form, p, k).unwrap();
                let boundary = &t[k as usize] * pow_rat(p, 3 * (2 * k / 3)) / pow_rat(p, 2 * k);
                assert_eq!(lhs, partial + boundary, "p={p} k={k}");
            }
        }
        // split: strat(k) = partial(k−1) + t_k·(S_top/p^{2k} − pref·C(k+1,2))
        for k in [2u32, 3, 4] {
            let p = 13u64;
            let lhs = kpg_stratified_exact(&form, &chi, p, k).unwrap();
            let partial = kp_exact_partial(&form, &chi, p, k - 1).unwrap();
            let t = t_sequence_exact(&form, p, k).unwrap();
            let s_top = Rat::from_integer(BigInt::from(s_count_closed(&chi, p, k, k).unwrap()))
                / pow_rat(p, 2 * k);
            let binom = rat_frac(k as u64 * (k as u64 + 1) / 2, 1);
            let boundary = &t[k as usize] * (s_top - kp_prefactor_exact(&chi, p) * binom);
            assert_eq!(lhs, partial + boundary, "k={k}");
        }
    }

    #[test]
    fn kp_close_to_kpg_small_primes() {
        let (field, chi, form) = setup();
        for p in [2u64, 3, 5] {
            let series = kp(&form, &chi, p, 1e-12).unwrap();
            let (geom, _) = kpg_brute(&field, &form, p, 3).unwrap();
            let tail = kpg_tail_estimate(&form, &chi, p, 3).unwrap();
            assert!(
                (series.value - geom).abs() <= series.tail_estimate + tail,
                "p = {p}: |{} − {geom}| > {} + {tail}",
                series.value,
                series.tail_estimate
            );
        }
    }

    #[test]
    fn kq_two_routes_agree_q7() {
        let (_, chi, form) = setup();
        let wsum = kq_wsum(&form, &chi, 5).unwrap();
        let limit = kq_limit(&form, &chi, 3).unwrap();
        let last = limit.per_k.last().unwrap();
        assert!(
            (wsum.value - last.value).abs() <= wsum.tail_bound + limit.tail_estimate,
            "wsum {} vs limit {} (tails {} + {})",
            wsum.value,
            last.value,
            wsum.tail_bound,
            limit.tail_estimate
        );
        assert!(wsum.value > 0.0);
    }

    #[test]
    fn kq_limit_first_step_frozen() {
        // q = 7, F = X³ + 2Y³: cubes mod 7 are {0,1,6}, doubles {0,2,5};
        // F(x) mod 7 lands in ℰ₇ = {0,1,6} for 25 of the 49 pairs
        let (_, chi, form) = setup();
        let limit = kq_limit(&form, &chi, 1).unwrap();
        assert_eq!(limit.per_k[0].count, 25);
        assert!((limit.per_k[0].value - 75.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn kq_wsum_cap_zero_specialization() {
        // cap = 0: all divisors 1 → (3φ(q)/q²)·Σ_α |W_{α,1,1}|
        let (_, chi, form) = setup();
        let got = kq_wsum(&form, &chi, 0).unwrap();
        let mut w_total = 0u64;
        for &alpha in &chi.kernel_g1 {
            w_total += wset(&form, &chi, alpha, 1, 1).unwrap().members.len() as u64;
        }
        let expect = 3.0 * chi.phi_q() as f64 / (49.0) * w_total as f64;
        assert!((got.value - expect).abs() < 1e-12);
    }

    #[test]
    fn kq_wsum_cap_doubling_within_tail() {
        let (_, chi, form) = setup();
        let small = kq_wsum(&form, &chi, 3).unwrap();
        let big = kq_wsum(&form, &chi, 6).unwrap();
        assert!(
            (small.value - big.value).abs() <= small.tail_bound,
            "cap 3 → 6 moved {} > tail {}",
            (small.value - big.value).abs(),
            small.tail_bound
        );
    }

    #[test]
    fn kq_limit_consecutive_step_bound() {
        let (_, chi, form) = setup();
        let limit = kq_limit(&form, &chi, 3).unwrap();
        for w in limit.per_k.windows(2) {
            assert!(
                (w[1].value - w[0].value).abs() <= w[0].step_bound,
                "step {} → {} moved {} > bound {}",
                w[0].k,
                w[1].k,
                (w[1].value - w[0].value).abs(),
                w[0].step_bound
            );
        }
    }

    #[test]
    fn k_total_assembles() {
        let (field, chi, form) = setup();
        let lv = l_value_product(&chi, 1e-8).unwrap();
        let rep = k_total(&form, &chi, &field, 200, 1e-10, 4, None, &lv).unwrap();
        assert!(rep.k_total > 0.0);
        assert!(rep.euler_stability < 0.05, "stability {}", rep.euler_stability);
        // report invariant: K_total = K_q·Π K_p
        let prod: f64 = rep.kp_rows.iter().map(|r| r.value).product();
        assert!((rep.k_total - rep.kq_value * prod).abs() < 1e-12 * rep.k_total.abs());
    }
}
