//! Root counting ρ_F⁻, ρ_F⁺, ρ_F* modulo prime powers and general moduli,
//! Λ-set counting over regions, and the norm-congruence counts S(A, p^k).
//!
//! Prime-power root counts lift level by level: a root with nonvanishing
//! derivative lifts uniquely (Hensel), a singular root is expanded by a
//! p-way scan. Brute enumeration oracles sit next to every closed path.

use crate::arith::{factor, gcd_u64, mul_mod, perfect_square_u128, primes_up_to};
use crate::census::RegionSpec;
use crate::character::{ChiValue, CubicCharacter};
use crate::error::{Error, Result};
use crate::field::CubicField;
use num::rational::Ratio;

/// F(X,Y) = a₀X³ + a₁X²Y + a₂XY² + a₃Y³ with integer coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCubicForm {
    pub coeffs: [i64; 4],
}

impl BinaryCubicForm {
    pub fn new(coeffs: [i64; 4]) -> Result<Self> {
        if coeffs.iter().any(|c| c.abs() > 1_000_000) {
            return Err(Error::Validation(
                "form coefficients beyond desk scale (|a| > 10^6)".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    /// 𝒟(F) = 18a₀a₁a₂a₃ − 4a₁³a₃ + a₁²a₂² − 4a₀a₂³ − 27a₀²a₃², equal to the
    /// discriminant of the dehomogenization F(X,1) when deg = 3.
    pub fn disc(&self) -> i128 {
        let [a, b, c, d] = self.coeffs.map(|v| v as i128);
        18 * a * b * c * d - 4 * b * b * b * d + b * b * c * c - 4 * a * c * c * c
            - 27 * a * a * d * d
    }

    /// ‖F‖ = max |aᵢ|.
    pub fn height(&self) -> i64 {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap()
    }

    pub fn eval(&self, m: i64, n: i64) -> i128 {
        let [a0, a1, a2, a3] = self.coeffs.map(|v| v as i128);
        let (m, n) = (m as i128, n as i128);
        ((a0 * m + a1 * n) * m + a2 * n * n) * m + a3 * n * n * n
    }

    /// F(m,n) mod s in [0, s).
    pub fn eval_mod(&self, m: i64, n: i64, s: u64) -> u64 {
        let s128 = s as u128;
        let red = |v: i64| ((v as i128).rem_euclid(s as i128)) as u128;
        let (m, n) = (red(m), red(n));
        let [a0, a1, a2, a3] = self.coeffs.map(|v| ((v as i128).rem_euclid(s as i128)) as u128);
        let n2 = n * n % s128;
        let mut acc = (a0 * m + a1 * n) % s128;
        acc = (acc * m + a2 * n2) % s128;
        acc = (acc * m + a3 * n2 % s128 * n) % s128;
        acc as u64
    }

    /// −F
    pub fn neg(&self) -> Self {
        Self { coeffs: self.coeffs.map(|c| -c) }
    }

    /// ascending coefficients of f(x) = F(x, 1)
    fn dehomogenized(&self) -> [i128; 4] {
        let [a0, a1, a2, a3] = self.coeffs.map(|v| v as i128);
        [a3, a2, a1, a0]
    }

    /// ascending coefficients of h(c) = F(1, p·c)
    fn infinity_chart(&self, p: u64) -> [i128; 4] {
        let [a0, a1, a2, a3] = self.coeffs.map(|v| v as i128);
        let p = p as i128;
        [a0, a1 * p, a2 * p * p, a3 * p * p * p]
    }
}

/// Work cap for singular-root expansion in the lifting path.
const LIFT_WORK_CAP: u64 = 20_000_000;

/// Evaluate an integer polynomial (ascending coefficients) mod m.
fn poly_eval_mod(coeffs: &[i128], x: u64, m: u64) -> u64 {
    let m128 = m as u128;
    let x = x as u128 % m128;
    let mut acc: u128 = 0;
    for &c in coeffs.iter().rev() {
        let cm = c.rem_euclid(m as i128) as u128;
        acc = (acc * x + cm) % m128;
    }
    acc as u64
}

/// Roots of the polynomial mod p^k, by set lifting. A root with f′ ≢ 0 mod p
/// lifts uniquely per level; singular roots cost a p-way scan, guarded by a
/// work cap.
fn poly_roots_mod_pk(coeffs: &[i128], p: u64, k: u32) -> Result<Vec<u64>> {
    let deriv: Vec<i128> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * i as i128)
        .collect();
    let mut work: u64 = p;
    if work > LIFT_WORK_CAP {
        return Err(Error::CapExceeded(format!("root scan mod {p}")));
    }
    let mut roots: Vec<u64> = (0..p).filter(|&x| poly_eval_mod(coeffs, x, p) == 0).collect();
    let mut modulus = p;
    for _ in 1..k {
        let next = modulus
            .checked_mul(p)
            .ok_or(Error::Overflow("prime power in root lifting"))?;
        let mut lifted = Vec::with_capacity(roots.len());
        for &a in &roots {
            let d = poly_eval_mod(&deriv, a, p);
            if d != 0 {
                // unique Hensel lift: t = −(f(a)/modulus)·d⁻¹ mod p
                let fa = poly_eval_mod(coeffs, a, next);
                debug_assert_eq!(fa % modulus, 0);
                let quotient = (fa / modulus) % p;
                let dinv = crate::arith::inv_mod(d, p).expect("unit derivative");
                let t = mul_mod((p - quotient) % p, dinv, p);
                lifted.push(a + t * modulus);
            } else {
                work += p;
                if work > LIFT_WORK_CAP {
                    return Err(Error::CapExceeded(format!(
                        "singular root expansion mod {p}^{k}"
                    )));
                }
                for t in 0..p {
                    let cand = a + t * modulus;
                    if poly_eval_mod(coeffs, cand, next) == 0 {
                        lifted.push(cand);
                    }
                }
            }
        }
        roots = lifted;
        modulus = next;
    }
    Ok(roots)
}

fn prime_power(p: u64, k: u32) -> Result<u64> {
    let mut acc = 1u64;
    for _ in 0..k {
        acc = acc.checked_mul(p).ok_or(Error::Overflow("prime power"))?;
    }
    Ok(acc)
}

fn phi_pk(p: u64, k: u32) -> u64 {
    if k == 0 {
        1
    } else {
        (p - 1) * p.pow(k - 1)
    }
}

/// ρ_F⁻(p^k): roots of F(a, 1) ≡ 0 mod p^k.
pub fn rho_minus_pp(form: &BinaryCubicForm, p: u64, k: u32) -> Result<u64> {
    if k == 0 {
        return Ok(1);
    }
    Ok(poly_roots_mod_pk(&form.dehomogenized(), p, k)?.len() as u64)
}

/// Projective roots of F mod p^k: finite chart (a : 1) plus the classes
/// (1 : pc) at infinity, c mod p^{k−1}.
fn proj_roots_pp_exact(form: &BinaryCubicForm, p: u64, k: u32) -> Result<u64> {
    let finite = rho_minus_pp(form, p, k)?;
    let at_infinity_raw = poly_roots_mod_pk(&form.infinity_chart(p), p, k)?.len() as u64;
    // h(c) only depends on c mod p^{k−1}, so the root count mod p^k is p
    // times the class count
    debug_assert_eq!(at_infinity_raw % p, 0);
    Ok(finite + at_infinity_raw / p)
}

/// Level past which the projective root count is constant in k: once
/// k exceeds twice the p-valuation of the discriminant data, every root has
/// derivative valuation at most v_p and lifts uniquely forever after.
/// Stability across four consecutive levels is asserted at runtime.
pub fn proj_roots_stable_level(form: &BinaryCubicForm, p: u64) -> u32 {
    let [a0, _, _, a3] = form.coeffs;
    let mut v = 0u32;
    let mut d = form.disc().unsigned_abs();
    let p128 = p as u128;
    while d != 0 && d % p128 == 0 {
        v += 1;
        d /= p128;
    }
    for extra in [a0.unsigned_abs(), a3.unsigned_abs()] {
        let mut e = extra;
        while e != 0 && e % p == 0 {
            v += 1;
            e /= p;
        }
    }
    2 * v + 2
}

/// Projective roots of F mod p^k, using the stabilization level so the count
/// is available at any depth without lifting past the stable regime.
pub fn proj_roots_pp(form: &BinaryCubicForm, p: u64, k: u32) -> Result<u64> {
    let stable = proj_roots_stable_level(form, p);
    if k <= stable + 3 {
        return proj_roots_pp_exact(form, p, k);
    }
    let base = proj_roots_pp_exact(form, p, stable)?;
    for j in 1..=3 {
        assert_eq!(
            proj_roots_pp_exact(form, p, stable + j)?,
            base,
            "projective root count not stable at p = {p}, level {}",
            stable + j
        );
    }
    Ok(base)
}

/// ρ_F*(p^k) = φ(p^k) · #projective roots: primitive pairs stratify into
/// free unit orbits over the projective classes.
pub fn rho_star_pp(form: &BinaryCubicForm, p: u64, k: u32) -> Result<u64> {
    if k == 0 {
        return Ok(1);
    }
    Ok(phi_pk(p, k) * proj_roots_pp(form, p, k)?)
}

/// ρ_F⁺(p^k): primitive part plus the pairs divisible by p, which rescale to
/// the subproblem three levels down.
pub fn rho_plus_pp(form: &BinaryCubicForm, p: u64, k: u32) -> Result<u64> {
    if k == 0 {
        return Ok(1);
    }
    let star = rho_star_pp(form, p, k)?;
    let imprimitive = match k {
        1 => 1,
        2 => p * p,
        _ => p
            .pow(4)
            .checked_mul(rho_plus_pp(form, p, k - 3)?)
            .ok_or(Error::Overflow("rho_plus"))?,
    };
    star.checked_add(imprimitive).ok_or(Error::Overflow("rho_plus"))
}

fn multiplicative_over_s(
    form: &BinaryCubicForm,
    s: u64,
    pp: impl Fn(&BinaryCubicForm, u64, u32) -> Result<u64>,
) -> Result<u64> {
    let mut acc: u64 = 1;
    for &(p, e) in &factor(s)?.pairs {
        acc = acc
            .checked_mul(pp(form, p, e)?)
            .ok_or(Error::Overflow("root count product"))?;
    }
    Ok(acc)
}

/// ρ_F⁻(s) = #{1 ≤ a ≤ s : F(a,1) ≡ 0 mod s}, multiplicative over s.
pub fn rho_minus(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    multiplicative_over_s(form, s, rho_minus_pp)
}

/// ρ_F⁺(s) = #{1 ≤ a,b ≤ s : F(a,b) ≡ 0 mod s}.
pub fn rho_plus(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    multiplicative_over_s(form, s, rho_plus_pp)
}

/// ρ_F*(s): as ρ⁺ restricted to gcd(a, b, s) = 1.
pub fn rho_star(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    multiplicative_over_s(form, s, rho_star_pp)
}

const BRUTE_PAIR_CAP: u64 = 500_000_000;

/// Direct enumeration oracle for ρ⁻.
pub fn rho_minus_brute(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    if s > 10_000_000 {
        return Err(Error::OracleScale(format!("rho_minus_brute(s = {s})")));
    }
    Ok((1..=s).filter(|&a| form.eval_mod(a as i64, 1, s) == 0).count() as u64)
}

/// Direct pair enumeration oracle for ρ⁺.
pub fn rho_plus_brute(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    if s.saturating_mul(s) > BRUTE_PAIR_CAP {
        return Err(Error::OracleScale(format!("rho_plus_brute(s = {s})")));
    }
    let mut count = 0u64;
    for a in 0..s {
        for b in 0..s {
            if form.eval_mod(a as i64, b as i64, s) == 0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Direct pair enumeration oracle for ρ*.
pub fn rho_star_brute(form: &BinaryCubicForm, s: u64) -> Result<u64> {
    if s.saturating_mul(s) > BRUTE_PAIR_CAP {
        return Err(Error::OracleScale(format!("rho_star_brute(s = {s})")));
    }
    let mut count = 0u64;
    for a in 0..s {
        for b in 0..s {
            if gcd_u64(gcd_u64(a, b), s) == 1 && form.eval_mod(a as i64, b as i64, s) == 0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// |Λ(s,F) ∩ R(ξ)|, optionally intersected with 𝒟_q = {(m,n) : (m,q) = 1}.
/// Exact integer count by a direct scan of the lattice points of R(ξ).
pub fn lambda_count(
    form: &BinaryCubicForm,
    s: u64,
    region: &RegionSpec,
    xi: Ratio<i64>,
    coprime_q: Option<u64>,
) -> u64 {
    let mut count = 0u64;
    let m_max = region.x_bound(xi);
    for m in -m_max..=m_max {
        if let Some(q) = coprime_q {
            if gcd_u64(m.unsigned_abs() % q, q) != 1 {
                continue;
            }
        }
        let Some(n_half) = region.row_half_width(m, xi) else { continue };
        for n in -n_half..=n_half {
            if form.eval_mod(m, n, s) == 0 {
                count += 1;
            }
        }
    }
    count
}

/// Closed-form S(A, p^k) = #{(y,z,t) mod p^k : P(y,z,t) ≡ A} for p ∤ q,
/// depending only on v_p(A) and the split type of p.
///
/// Non-split p: p^{2k}(1 + 1/p + 1/p²) when 3 | v and v < k, zero when
/// 3 ∤ v and v < k, p^{3⌊2k/3⌋} when v ≥ k.
/// Split p: p^{2k}(1 − 1/p)²·C(v+2, 2) when v < k, and
/// p^{2k}{k(k+1)/2·(1−1/p)² + k(1−1/p) + 1} when v ≥ k.
pub fn s_count_closed(chi: &CubicCharacter, p: u64, k: u32, v_a: u32) -> Result<u128> {
    if chi.modulus_q % p == 0 {
        return Err(Error::RamifiedPrime(p));
    }
    if k == 0 {
        return Ok(1);
    }
    let split = chi.value(p) == ChiValue::One;
    let p = p as u128;
    let ppow = |e: u32| -> Result<u128> {
        let mut acc = 1u128;
        for _ in 0..e {
            acc = acc.checked_mul(p).ok_or(Error::Overflow("s_count_closed"))?;
        }
        Ok(acc)
    };
    if split {
        let base = ppow(2 * k - 2)?;
        if v_a < k {
            let binom = (v_a as u128 + 1) * (v_a as u128 + 2) / 2;
            base.checked_mul((p - 1) * (p - 1))
                .and_then(|v| v.checked_mul(binom))
                .ok_or(Error::Overflow("s_count_closed"))
        } else {
            let kk = k as u128;
            let inner = kk * (kk + 1) / 2 * (p - 1) * (p - 1) + kk * p * (p - 1) + p * p;
            base.checked_mul(inner).ok_or(Error::Overflow("s_count_closed"))
        }
    } else if v_a < k {
        if v_a % 3 == 0 {
            ppow(2 * k - 2)?
                .checked_mul(p * p + p + 1)
                .ok_or(Error::Overflow("s_count_closed"))
        } else {
            Ok(0)
        }
    } else {
        ppow(3 * (2 * k / 3))
    }
}

/// Exhaustive table of S(A, p^k) over all residues A mod p^k, one pass over
/// the p^{3k} triples. Oracle; budget p^{3k} ≤ 10⁸.
pub fn s_count_table(field: &CubicField, p: u64, k: u32) -> Result<Vec<u64>> {
    let pk = prime_power(p, k)?;
    let triples = (pk as u128).pow(3);
    if triples > 100_000_000 {
        return Err(Error::OracleScale(format!(
            "s_count table p^3k = {triples} exceeds 10^8"
        )));
    }
    let c = &field.norm_form.coeffs;
    let m = pk as u128;
    let red = |v: i128| v.rem_euclid(pk as i128) as u128;
    let mut table = vec![0u64; pk as usize];
    for y in 0..pk as u128 {
        for z in 0..pk as u128 {
            // P as a cubic in t for fixed (y, z):
            // t³: c9; t²: c5·y + c8·z; t: c2·y² + c4·yz + c7·z²;
            // 1: c0·y³ + c1·y²z + c3·yz² + c6·z³
            let y2 = y * y % m;
            let z2 = z * z % m;
            let yz = y * z % m;
            let c3t = red(c[9]);
            let c2t = (red(c[5]) * y + red(c[8]) * z) % m;
            let c1t = (red(c[2]) * y2 + red(c[4]) * yz + red(c[7]) * z2) % m;
            let c0t = (red(c[0]) * (y2 * y % m) + red(c[1]) * (y2 * z % m)
                + red(c[3]) * (y * z2 % m)
                + red(c[6]) * (z2 * z % m))
                % m;
            for t in 0..pk as u128 {
                let v = ((c3t * t % m + c2t) * t % m + c1t) * t % m + c0t;
                table[(v % m) as usize] += 1;
            }
        }
    }
    Ok(table)
}

/// Exhaustive S(A, p^k) for a single A.
pub fn s_count_brute(field: &CubicField, p: u64, k: u32, a: u64) -> Result<u64> {
    let pk = prime_power(p, k)?;
    Ok(s_count_table(field, p, k)?[(a % pk) as usize])
}

/// v_p(A) capped at `cap` (A = 0 maps to the cap).
pub fn v_p_capped(a: u64, p: u64, cap: u32) -> u32 {
    if a == 0 {
        return cap;
    }
    let mut v = 0;
    let mut a = a;
    while v < cap && a % p == 0 {
        a /= p;
        v += 1;
    }
    v
}

/// Decide hypothesis (H4): F irreducible over the cyclic cubic field K.
///
/// A cubic irreducible over Q factors over the Galois cubic K exactly when
/// its rupture field is K. That forces disc(F) to be a positive perfect
/// square and the complete-split primes of F and K to coincide, so a
/// non-square disc or any split-set mismatch is a rigorous witness for H4.
/// With no witness at desk scale the form is rejected.
pub fn h4_check(form: &BinaryCubicForm, field: &CubicField, chi: &CubicCharacter) -> Result<()> {
    if is_reducible_over_q(form) {
        return Err(Error::NotIrreducible);
    }
    let d = form.disc();
    assert_ne!(d, 0, "irreducible cubic has nonzero discriminant");
    if d < 0 || perfect_square_u128(d as u128).is_none() {
        return Ok(()); // rupture field is not Galois, cannot be K
    }
    let q = field.conductor_q;
    for p in primes_up_to(3000) {
        if q % p == 0
            || d.unsigned_abs() % p as u128 == 0
            || form.coeffs[0].unsigned_abs() % p == 0
        {
            continue;
        }
        let f_split = rho_minus_pp(form, p, 1).unwrap_or(0) == 3;
        let k_split = chi.value(p) == ChiValue::One;
        if f_split != k_split {
            return Ok(()); // split sets differ: distinct cubic fields
        }
    }
    Err(Error::NotIrreducibleOverK)
}

/// Reducible over Q iff F has an integral linear factor vX − uY, whose
/// coefficients must satisfy u | a₃ and v | a₀.
pub fn is_reducible_over_q(form: &BinaryCubicForm) -> bool {
    let [a0, _, _, a3] = form.coeffs;
    if a0 == 0 || a3 == 0 {
        return true; // Y (resp. X) divides F
    }
    for &u in &divisors_signed(a3) {
        for &v in &divisors_signed(a0) {
            if form.eval(u, v) == 0 {
                return true;
            }
        }
    }
    false
}

fn divisors_signed(n: i64) -> Vec<i64> {
    let n = n.unsigned_abs();
    let mut out = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d as i64);
            out.push(-(d as i64));
            out.push((n / d) as i64);
            out.push(-((n / d) as i64));
        }
        d += 1;
    }
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BuiltinField;

    fn form_x3_2y3() -> BinaryCubicForm {
        BinaryCubicForm::new([1, 0, 0, 2]).unwrap()
    }

    /// homogenized conductor-7 field polynomial, disc 49
    fn form_q7_poly() -> BinaryCubicForm {
        BinaryCubicForm::new([1, 1, -2, -1]).unwrap()
    }

    fn chi_for(which: BuiltinField) -> (CubicField, CubicCharacter) {
        let f = CubicField::builtin(which);
        let c = CubicCharacter::for_field(&f).unwrap();
        (f, c)
    }

    #[test]
    fn disc_and_height() {
        assert_eq!(form_x3_2y3().disc(), -108);
        assert_eq!(form_x3_2y3().height(), 2);
        assert_eq!(form_q7_poly().disc(), 49);
    }

    #[test]
    fn rho_minus_examples() {
        let f = form_x3_2y3();
        assert_eq!(rho_minus(&f, 5).unwrap(), 1); // cubing is a bijection mod 5
        assert_eq!(rho_minus(&f, 7).unwrap(), 0); // −2 is not a cube mod 7
        assert_eq!(rho_minus(&f, 1).unwrap(), 1);
    }

    #[test]
    fn rho_plus_examples() {
        let f = form_x3_2y3();
        assert_eq!(rho_plus(&f, 5).unwrap(), 5); // four unit pairs + (0,0)
        assert_eq!(rho_plus(&f, 169).unwrap(), 169); // all pairs 13|a, 13|b
    }

    #[test]
    fn rho_star_below_rho_plus() {
        let f = form_x3_2y3();
        for s in 1..=60u64 {
            assert!(rho_star(&f, s).unwrap() <= rho_plus(&f, s).unwrap(), "s = {s}");
        }
    }

    #[test]
    fn lifted_counts_match_brute_on_prime_powers() {
        for form in [form_x3_2y3(), form_q7_poly()] {
            for p in [2u64, 3, 5, 7, 11, 13] {
                let mut k = 1u32;
                while p.pow(k) <= 1000 {
                    let s = p.pow(k);
                    assert_eq!(
                        rho_minus(&form, s).unwrap(),
                        rho_minus_brute(&form, s).unwrap(),
                        "rho- {s}"
                    );
                    assert_eq!(
                        rho_plus(&form, s).unwrap(),
                        rho_plus_brute(&form, s).unwrap(),
                        "rho+ {s}"
                    );
                    assert_eq!(
                        rho_star(&form, s).unwrap(),
                        rho_star_brute(&form, s).unwrap(),
                        "rho* {s}"
                    );
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn crt_multiplicativity_small_grid() {
        let f = form_q7_poly();
        for s1 in 2..=100u64 {
            for s2 in 2..=100u64 {
                if s1 * s2 > 200 || gcd_u64(s1, s2) != 1 {
                    continue;
                }
                assert_eq!(
                    rho_plus(&f, s1 * s2).unwrap(),
                    rho_plus(&f, s1).unwrap() * rho_plus(&f, s2).unwrap()
                );
                assert_eq!(
                    rho_star(&f, s1 * s2).unwrap(),
                    rho_star(&f, s1).unwrap() * rho_star(&f, s2).unwrap()
                );
                assert_eq!(
                    rho_minus(&f, s1 * s2).unwrap(),
                    rho_minus(&f, s1).unwrap() * rho_minus(&f, s2).unwrap()
                );
            }
        }
    }

    #[test]
    fn lambda_count_gauss_circle() {
        let f = form_x3_2y3();
        let region = RegionSpec::unit_disc();
        let count = lambda_count(&f, 1, &region, Ratio::new(10, 1), None);
        assert_eq!(count, 317);
    }

    #[test]
    fn lambda_count_residue_class_consistency() {
        // count for s equals the sum over residue classes mod s hitting the region
        let f = form_x3_2y3();
        let region = RegionSpec::unit_disc();
        let xi = Ratio::new(9, 1);
        for s in [2u64, 5, 7, 12] {
            let direct = lambda_count(&f, s, &region, xi, None);
            let mut by_classes = 0u64;
            for a in 0..s {
                for b in 0..s {
                    if f.eval_mod(a as i64, b as i64, s) != 0 {
                        continue;
                    }
                    let m_max = region.x_bound(xi);
                    for m in -m_max..=m_max {
                        if (m as i128 - a as i128).rem_euclid(s as i128) != 0 {
                            continue;
                        }
                        if let Some(h) = region.row_half_width(m, xi) {
                            for n in -h..=h {
                                if (n as i128 - b as i128).rem_euclid(s as i128) == 0 {
                                    by_classes += 1;
                                }
                            }
                        }
                    }
                }
            }
            assert_eq!(direct, by_classes, "s = {s}");
        }
    }

    #[test]
    fn s_count_closed_examples() {
        let (_, chi) = chi_for(BuiltinField::Q7);
        // non-split p = 2, k = 1, v = 0 → 7
        assert_eq!(s_count_closed(&chi, 2, 1, 0).unwrap(), 7);
        // split p = 13 (13 ≡ 6 ∈ G₁), k = 1, v = 0 → 144
        assert_eq!(s_count_closed(&chi, 13, 1, 0).unwrap(), 144);
        // non-split, v = 1 < k, 3 ∤ v → 0
        assert_eq!(s_count_closed(&chi, 2, 2, 1).unwrap(), 0);
        // v ≥ k branch: p = 2, k = 1 → p^{3⌊2/3⌋} = 1
        assert_eq!(s_count_closed(&chi, 2, 1, 1).unwrap(), 1);
        assert!(matches!(s_count_closed(&chi, 7, 1, 0), Err(Error::RamifiedPrime(7))));
    }

    #[test]
    fn s_count_closed_matches_brute() {
        let (field, chi) = chi_for(BuiltinField::Q7);
        for (p, k) in [
            (2u64, 1u32),
            (2, 2),
            (2, 3),
            (3, 1),
            (3, 2),
            (5, 1),
            (13, 1),
            (13, 2),
            (29, 1),
            (41, 1),
        ] {
            let pk = p.pow(k);
            let table = s_count_table(&field, p, k).unwrap();
            for a in 0..pk {
                let v = v_p_capped(a, p, k);
                let closed = s_count_closed(&chi, p, k, v).unwrap();
                assert_eq!(closed, table[a as usize] as u128, "p={p} k={k} A={a}");
            }
        }
    }

    #[test]
    fn prop_51_ramified_exhaustive() {
        // |{P ≡ A mod q}| = 3q² for every A with coprime part in G₁
        for which in BuiltinField::all() {
            let (field, chi) = chi_for(which);
            let q = field.conductor_q;
            let p = chi.q_primes[0];
            let vq = if q == 9 { 2 } else { 1 };
            let table = s_count_table(&field, p, vq).unwrap();
            for a in 1..q {
                if gcd_u64(a, q) != 1 {
                    continue;
                }
                let expect = if chi.kernel_g1.contains(&a) { 3 * q * q } else { 0 };
                assert_eq!(table[a as usize], expect, "q={q} A={a}");
            }
        }
    }

    #[test]
    fn norm_surjective_on_units_split_prime() {
        // split p coprime to q: every unit residue is attained
        let (field, chi) = chi_for(BuiltinField::Q7);
        assert_eq!(chi.value(13), ChiValue::One);
        for k in 1..=2u32 {
            let pk = 13u64.pow(k);
            let table = s_count_table(&field, 13, k).unwrap();
            for a in 1..pk {
                if a % 13 != 0 {
                    assert!(table[a as usize] > 0, "unit {a} missed mod 13^{k}");
                }
            }
        }
    }

    #[test]
    fn h4_examples() {
        let (field7, chi7) = chi_for(BuiltinField::Q7);
        let (field13, chi13) = chi_for(BuiltinField::Q13);
        // non-square disc: irreducible over every cyclic cubic
        assert!(h4_check(&form_x3_2y3(), &field7, &chi7).is_ok());
        assert!(h4_check(&form_x3_2y3(), &field13, &chi13).is_ok());
        // the conductor-7 field polynomial splits over its own field
        assert!(matches!(
            h4_check(&form_q7_poly(), &field7, &chi7),
            Err(Error::NotIrreducibleOverK)
        ));
        // ... but not over the conductor-13 field
        assert!(h4_check(&form_q7_poly(), &field13, &chi13).is_ok());
        // g(X − Y) homogenized: root α + 1 lies in K, disc is still 49
        let shifted = BinaryCubicForm::new([1, -2, -1, 1]).unwrap();
        assert_eq!(shifted.disc(), 49);
        assert!(matches!(
            h4_check(&shifted, &field7, &chi7),
            Err(Error::NotIrreducibleOverK)
        ));
        // reducible over Q
        let reducible = BinaryCubicForm::new([1, 0, -1, 0]).unwrap(); // X(X−Y)(X+Y)
        assert!(matches!(
            h4_check(&reducible, &field7, &chi7),
            Err(Error::NotIrreducible)
        ));
    }
}
