//! Exact order-3 Dirichlet characters mod q, their kernel G₁, the admissible
//! sets ℰ_d, and L(1,χ)L(1,χ²).
//!
//! Character values live in {0} ∪ μ₃ and are stored as exponent-or-zero;
//! every character sum in the library is evaluated exactly in Z[ω].

use crate::arith::{factor, gcd_u64, inv_mod, mul_mod, pow_mod, primes_up_to};
use crate::error::{Error, Result};
use crate::field::CubicField;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Mutex;

/// Exact element a + bω of Z[ω], ω = e^{2πi/3}, so ω² = −1 − ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EisensteinInt {
    pub a: i64,
    pub b: i64,
}

impl EisensteinInt {
    pub const ZERO: Self = Self { a: 0, b: 0 };
    pub const ONE: Self = Self { a: 1, b: 0 };
    /// ω itself.
    pub const OMEGA: Self = Self { a: 0, b: 1 };
    /// ω² = −1 − ω.
    pub const OMEGA_SQ: Self = Self { a: -1, b: -1 };

    pub fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    /// Squared modulus a² − ab + b², always a nonnegative integer.
    pub fn norm_sq(&self) -> i128 {
        let a = self.a as i128;
        let b = self.b as i128;
        a * a - a * b + b * b
    }

    pub fn conj(&self) -> Self {
        // conj(a + bω) = a + bω² = (a − b) − bω
        Self { a: self.a - self.b, b: -self.b }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn to_complex(&self) -> (f64, f64) {
        // ω = −1/2 + i√3/2
        let re = self.a as f64 - 0.5 * self.b as f64;
        let im = self.b as f64 * 3f64.sqrt() / 2.0;
        (re, im)
    }
}

impl Add for EisensteinInt {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { a: self.a + rhs.a, b: self.b + rhs.b }
    }
}

impl AddAssign for EisensteinInt {
    fn add_assign(&mut self, rhs: Self) {
        self.a += rhs.a;
        self.b += rhs.b;
    }
}

impl Sub for EisensteinInt {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { a: self.a - rhs.a, b: self.b - rhs.b }
    }
}

impl Neg for EisensteinInt {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b }
    }
}

impl Mul for EisensteinInt {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        // (a + bω)(c + dω) = ac + (ad + bc)ω + bdω², ω² = −1 − ω
        let (a, b, c, d) = (self.a, self.b, rhs.a, rhs.b);
        Self {
            a: a * c - b * d,
            b: a * d + b * c - b * d,
        }
    }
}

/// A character value: zero or a cube root of unity stored by exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChiValue {
    Zero,
    One,
    Omega,
    OmegaSq,
}

impl ChiValue {
    pub fn from_exp(e: u8) -> Self {
        match e % 3 {
            0 => ChiValue::One,
            1 => ChiValue::Omega,
            _ => ChiValue::OmegaSq,
        }
    }

    pub fn exp(&self) -> Option<u8> {
        match self {
            ChiValue::Zero => None,
            ChiValue::One => Some(0),
            ChiValue::Omega => Some(1),
            ChiValue::OmegaSq => Some(2),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        match self.exp() {
            None => {
                if k == 0 {
                    ChiValue::One
                } else {
                    ChiValue::Zero
                }
            }
            Some(e) => ChiValue::from_exp(((e as u32 * k) % 3) as u8),
        }
    }

    pub fn to_eisenstein(&self) -> EisensteinInt {
        match self {
            ChiValue::Zero => EisensteinInt::ZERO,
            ChiValue::One => EisensteinInt::ONE,
            ChiValue::Omega => EisensteinInt::OMEGA,
            ChiValue::OmegaSq => EisensteinInt::OMEGA_SQ,
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            ChiValue::Omega => ChiValue::OmegaSq,
            ChiValue::OmegaSq => ChiValue::Omega,
            v => *v,
        }
    }
}

impl Mul for ChiValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.exp(), rhs.exp()) {
            (Some(e1), Some(e2)) => ChiValue::from_exp((e1 + e2) % 3),
            _ => ChiValue::Zero,
        }
    }
}

/// Euler phi from a factorization of n.
pub fn euler_phi(n: u64) -> u64 {
    factor(n)
        .expect("n >= 1")
        .pairs
        .iter()
        .fold(1u64, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Smallest primitive root modulo an odd prime power.
pub fn smallest_primitive_root(pk: u64) -> Option<u64> {
    let f = factor(pk).ok()?;
    if f.pairs.len() != 1 || f.pairs[0].0 == 2 {
        return None;
    }
    let phi = euler_phi(pk);
    let phi_primes: Vec<u64> = factor(phi).ok()?.pairs.iter().map(|&(p, _)| p).collect();
    'g: for g in 2..pk {
        if gcd_u64(g, pk) != 1 {
            continue;
        }
        for &ell in &phi_primes {
            if pow_mod(g, phi / ell, pk) == 1 {
                continue 'g;
            }
        }
        return Some(g);
    }
    None
}

/// Order-3 Dirichlet character modulo q with exact values in {0} ∪ μ₃.
#[derive(Debug)]
pub struct CubicCharacter {
    pub modulus_q: u64,
    /// values indexed by residue: table[n % q]
    pub value_table: Vec<ChiValue>,
    /// ker χ, sorted residues
    pub kernel_g1: Vec<u64>,
    /// distinct primes dividing q
    pub q_primes: Vec<u64>,
    /// conductor of χ equals q
    pub primitive: bool,
    epsilon_cache: Mutex<HashMap<u64, EpsilonSet>>,
}

impl Clone for CubicCharacter {
    fn clone(&self) -> Self {
        CubicCharacter {
            modulus_q: self.modulus_q,
            value_table: self.value_table.clone(),
            kernel_g1: self.kernel_g1.clone(),
            q_primes: self.q_primes.clone(),
            primitive: self.primitive,
            epsilon_cache: Mutex::new(HashMap::new()),
        }
    }
}

/// Projection ℰ_d of the admissible set ℰ on Z/dZ: residues reachable as
/// α·d₁ modulo (d₁q, d) with α ∈ G₁ and d₁ | q^∞.
#[derive(Debug, Clone)]
pub struct EpsilonSet {
    pub modulus_d: u64,
    pub members: Vec<bool>,
}

impl EpsilonSet {
    pub fn contains(&self, n: u64) -> bool {
        self.members[(n % self.modulus_d) as usize]
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }
}

fn multiplicative_order(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 1;
    }
    debug_assert_eq!(gcd_u64(a, m), 1);
    let mut x = a % m;
    let mut ord = 1u64;
    while x != 1 {
        x = mul_mod(x, a, m);
        ord += 1;
    }
    ord
}

impl CubicCharacter {
    /// All characters of order exactly 3 modulo q (conjugate pairs included).
    pub fn all_for_modulus(q: u64) -> Result<Vec<CubicCharacter>> {
        if q < 3 {
            return Err(Error::NoCubicCharacter(q));
        }
        let fq = factor(q)?;
        // components able to carry an order-3 character: odd p^a with 3 | phi(p^a)
        let mut comp = Vec::new(); // (p, p^a, exp3 table over Z/p^a)
        for &(p, a) in &fq.pairs {
            if p == 2 {
                continue;
            }
            let pa = p.pow(a);
            let phi = (p - 1) * p.pow(a - 1);
            if phi % 3 != 0 {
                continue;
            }
            let g = smallest_primitive_root(pa).expect("odd prime power has a primitive root");
            let mut exp3 = vec![u8::MAX; pa as usize]; // MAX marks non-units
            let mut x = 1u64;
            for t in 0..phi {
                exp3[x as usize] = (t % 3) as u8;
                x = mul_mod(x, g, pa);
            }
            comp.push((p, pa, exp3));
        }
        if comp.is_empty() {
            return Err(Error::NoCubicCharacter(q));
        }
        let q_primes: Vec<u64> = fq.pairs.iter().map(|&(p, _)| p).collect();
        let mut out = Vec::new();
        let m = comp.len();
        let mut js = vec![0u8; m];
        loop {
            // advance the exponent vector (base-3 counter)
            let mut i = 0;
            while i < m {
                js[i] += 1;
                if js[i] < 3 {
                    break;
                }
                js[i] = 0;
                i += 1;
            }
            if i == m {
                break;
            }
            let mut table = vec![ChiValue::Zero; q as usize];
            for n in 0..q {
                if gcd_u64(n, q) != 1 {
                    continue;
                }
                let mut e = 0u32;
                for (k, (_, pa, exp3)) in comp.iter().enumerate() {
                    let loc = exp3[(n % pa) as usize];
                    debug_assert_ne!(loc, u8::MAX);
                    e += js[k] as u32 * loc as u32;
                }
                table[n as usize] = ChiValue::from_exp((e % 3) as u8);
            }
            let kernel: Vec<u64> = (0..q).filter(|&n| table[n as usize] == ChiValue::One).collect();
            // primitive iff every component is used and is itself primitive:
            // p ≡ 1 mod 3 needs exponent a = 1, p = 3 needs a = 2
            let mut primitive = comp.iter().enumerate().all(|(k, &(p, pa, _))| {
                js[k] != 0 && if p == 3 { pa == 9 } else { pa == p }
            });
            // every prime of q must be covered by a used component
            for &(p, a) in &fq.pairs {
                let covered = comp
                    .iter()
                    .enumerate()
                    .any(|(k, &(cp, _, _))| cp == p && js[k] != 0);
                if !covered {
                    primitive = false;
                }
                let _ = a;
            }
            out.push(CubicCharacter {
                modulus_q: q,
                value_table: table,
                kernel_g1: kernel,
                q_primes: q_primes.clone(),
                primitive,
                epsilon_cache: Mutex::new(HashMap::new()),
            });
        }
        if out.is_empty() {
            return Err(Error::NoCubicCharacter(q));
        }
        Ok(out)
    }

    /// The character cut out by a cyclic cubic field: χ(p) = 1 exactly when p
    /// splits (three roots of the defining cubic mod p), for p coprime to
    /// q·disc. Between χ and χ² the one with χ(g) = ω is returned, g the
    /// smallest primitive root of the smallest prime-power factor of q
    /// carrying a nontrivial component.
    pub fn for_field(field: &CubicField) -> Result<CubicCharacter> {
        let q = field.conductor_q;
        let candidates = Self::all_for_modulus(q)?;
        let mut survivors = candidates;
        let mut bound = 1000u64;
        loop {
            let primes = primes_up_to(bound);
            let mut filtered = Vec::new();
            'cand: for c in survivors.iter() {
                for &p in &primes {
                    if q % p == 0 || field.disc.unsigned_abs() % p as u128 == 0 {
                        continue;
                    }
                    let split = field.root_count_mod_p(p) == 3;
                    if split != (c.value(p) == ChiValue::One) {
                        continue 'cand;
                    }
                }
                filtered.push(c.clone());
            }
            // distinct kernels left?
            let mut kernels: Vec<&[u64]> = filtered.iter().map(|c| c.kernel_g1.as_slice()).collect();
            kernels.sort();
            kernels.dedup();
            match kernels.len() {
                0 => return Err(Error::NoCubicCharacter(q)),
                1 => {
                    let canon = Self::canonicalize(filtered)?;
                    return Ok(canon);
                }
                _ => {
                    if bound >= 100_000 {
                        return Err(Error::NoCubicCharacter(q));
                    }
                    bound *= 10;
                    survivors = filtered;
                }
            }
        }
    }

    /// The canonical order-3 character mod q when the kernel is unique
    /// (prime-power q in particular); composite conductors with several
    /// kernels need a field to disambiguate.
    pub fn canonical_for_modulus(q: u64) -> Result<CubicCharacter> {
        let all = Self::all_for_modulus(q)?;
        let mut kernels: Vec<&[u64]> = all.iter().map(|c| c.kernel_g1.as_slice()).collect();
        kernels.sort();
        kernels.dedup();
        if kernels.len() > 1 {
            return Err(Error::Validation(format!(
                "modulus {q} carries {} distinct order-3 kernels; construct via a field",
                kernels.len()
            )));
        }
        Self::canonicalize(all)
    }

    fn canonicalize(mut pair: Vec<CubicCharacter>) -> Result<CubicCharacter> {
        let q = pair[0].modulus_q;
        let fq = factor(q)?;
        let mut pps: Vec<u64> = fq.pairs.iter().map(|&(p, e)| p.pow(e)).collect();
        pps.sort_unstable();
        for &pp in &pps {
            let Some(g) = smallest_primitive_root(pp) else { continue };
            // lift: n ≡ g mod pp, n ≡ 1 mod q/pp
            let rest = q / pp;
            let lift = if rest == 1 {
                g
            } else {
                let inv = inv_mod(pp % rest, rest)
                    .ok_or_else(|| Error::Validation("conductor factors not coprime".into()))?;
                // n = g + pp * t with t ≡ (1 − g)·pp^{-1} mod rest
                let t = mul_mod(((1 + 3 * rest as i128 - g as i128 % rest as i128) % rest as i128) as u64, inv, rest);
                (g + pp * t) % q
            };
            match pair[0].value(lift) {
                ChiValue::Omega => return Ok(pair.swap_remove(0)),
                ChiValue::OmegaSq => {
                    return Ok(pair
                        .into_iter()
                        .find(|c| c.value(lift) == ChiValue::Omega)
                        .expect("conjugate character present"));
                }
                _ => continue, // component trivial for this character; try the next factor
            }
        }
        Err(Error::Validation("canonicalization found no nontrivial component".into()))
    }

    pub fn phi_q(&self) -> u64 {
        euler_phi(self.modulus_q)
    }

    /// χ(n) for n given as a residue (nonnegative).
    pub fn value(&self, n: u64) -> ChiValue {
        self.value_table[(n % self.modulus_q) as usize]
    }

    /// χ(n) for signed n (reduced mod q).
    pub fn value_i128(&self, n: i128) -> ChiValue {
        let q = self.modulus_q as i128;
        let r = ((n % q) + q) % q;
        self.value_table[r as usize]
    }

    /// Exact χ^k(n) in Z[ω]; zero when gcd(n, q) > 1.
    pub fn chi_pow(&self, n: i128, k: u32) -> EisensteinInt {
        self.value_i128(n).pow(k).to_eisenstein()
    }

    /// The conjugate character χ² = χ̄.
    pub fn squared(&self) -> CubicCharacter {
        CubicCharacter {
            modulus_q: self.modulus_q,
            value_table: self.value_table.iter().map(|v| v.conj()).collect(),
            kernel_g1: self.kernel_g1.clone(),
            q_primes: self.q_primes.clone(),
            primitive: self.primitive,
            epsilon_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Check that every prime factor of d divides q.
    pub fn check_q_smooth(&self, d: u64) -> Result<()> {
        if d == 0 {
            return Err(Error::BadDivisor(d, self.modulus_q));
        }
        let mut m = d;
        for &p in &self.q_primes {
            while m % p == 0 {
                m /= p;
            }
        }
        if m != 1 {
            return Err(Error::BadModulus(d, self.modulus_q));
        }
        Ok(())
    }

    /// Divisors of q^∞ up to `bound` (all prime factors divide q), sorted.
    pub fn q_smooth_divisors(&self, bound: u64) -> Vec<u64> {
        let mut out = vec![1u64];
        for &p in &self.q_primes {
            let len = out.len();
            for i in 0..len {
                let mut v = out[i];
                loop {
                    match v.checked_mul(p) {
                        Some(next) if next <= bound => {
                            v = next;
                            out.push(v);
                        }
                        _ => break,
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// ℰ_d with explicit per-prime caps on the d₁ exponents (testing hook).
    pub fn epsilon_set_with_caps(&self, d: u64, caps: &[(u64, u32)]) -> Result<EpsilonSet> {
        self.check_q_smooth(d)?;
        let q = self.modulus_q;
        let mut members = vec![false; d as usize];
        // enumerate d₁ = Π p^{e_p} through exponent vectors
        let primes: Vec<u64> = self.q_primes.clone();
        let caps: Vec<u32> = primes
            .iter()
            .map(|&p| caps.iter().find(|&&(cp, _)| cp == p).map(|&(_, c)| c).unwrap_or(0))
            .collect();
        let vq: Vec<u32> = primes
            .iter()
            .map(|&p| {
                let mut v = 0;
                let mut m = q;
                while m % p == 0 {
                    v += 1;
                    m /= p;
                }
                v
            })
            .collect();
        let vd: Vec<u32> = primes
            .iter()
            .map(|&p| {
                let mut v = 0;
                let mut m = d;
                while m % p == 0 {
                    v += 1;
                    m /= p;
                }
                v
            })
            .collect();
        let mut exps = vec![0u32; primes.len()];
        loop {
            // modulus m = gcd(d₁·q, d) and residue r = d₁ mod d
            let mut modulus = 1u64;
            let mut r = 1u64;
            for (i, &p) in primes.iter().enumerate() {
                modulus *= p.pow((exps[i] + vq[i]).min(vd[i]));
                r = mul_mod(r, pow_mod(p, exps[i] as u64, d), d);
            }
            for &alpha in &self.kernel_g1 {
                let val = mul_mod(alpha % modulus, r % modulus, modulus);
                let mut x = val;
                while x < d {
                    members[x as usize] = true;
                    x += modulus;
                }
            }
            // advance exponent vector
            let mut i = 0;
            while i < exps.len() {
                exps[i] += 1;
                if exps[i] <= caps[i] {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
            if i == exps.len() {
                break;
            }
        }
        Ok(EpsilonSet { modulus_d: d, members })
    }

    /// ℰ_d with provably sufficient caps: per prime, exponents beyond
    /// v_p(d) + ord(p mod d/p^{v_p(d)}) repeat an already-seen
    /// (modulus, residue) pair, so nothing new is marked.
    pub fn epsilon_set(&self, d: u64) -> Result<EpsilonSet> {
        if let Some(e) = self.epsilon_cache.lock().unwrap().get(&d) {
            return Ok(e.clone());
        }
        self.check_q_smooth(d)?;
        let caps: Vec<(u64, u32)> = self
            .q_primes
            .iter()
            .map(|&p| {
                let mut vd = 0u32;
                let mut rest = d;
                while rest % p == 0 {
                    vd += 1;
                    rest /= p;
                }
                (p, vd + multiplicative_order(p % rest.max(1), rest) as u32)
            })
            .collect();
        let set = self.epsilon_set_with_caps(d, &caps)?;
        self.epsilon_cache.lock().unwrap().insert(d, set.clone());
        Ok(set)
    }

    /// n ∈ ℰ_d?
    pub fn epsilon_member(&self, d: u64, n: u64) -> Result<bool> {
        Ok(self.epsilon_set(d)?.contains(n))
    }
}

/// L(1,χ)·L(1,χ²) = |L(1,χ)|² by two routes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LValueProduct {
    /// Gauss-sum closed form value (the returned one)
    pub value: f64,
    /// partial Dirichlet series with analytic tail correction
    pub series_value: f64,
    /// |closed − series|
    pub cross_delta: f64,
}

#[derive(Debug, Clone, Copy)]
struct C64 {
    re: f64,
    im: f64,
}

impl C64 {
    const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
    fn add(self, o: C64) -> C64 {
        C64 { re: self.re + o.re, im: self.im + o.im }
    }
    fn mul(self, o: C64) -> C64 {
        C64 {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    fn scale(self, s: f64) -> C64 {
        C64 { re: self.re * s, im: self.im * s }
    }
    fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

fn chi_c64(v: ChiValue) -> C64 {
    let (re, im) = v.to_eisenstein().to_complex();
    C64 { re, im }
}

/// L(1,χ)L(1,χ²) for a primitive even χ:
/// closed form L(1,χ) = −(τ(χ)/q) Σ_a χ̄(a) log(2 sin(πa/q)), cross-checked
/// against the partial Dirichlet series Σ_{n≤N} χ(n)/n with an exact periodic
/// tail expansion. Disagreement beyond `tol` is an error.
pub fn l_value_product(chi: &CubicCharacter, tol: f64) -> Result<LValueProduct> {
    if !chi.primitive {
        return Err(Error::NotPrimitive(chi.modulus_q));
    }
    let q = chi.modulus_q;
    // Gauss sum τ(χ)
    let mut tau = C64::ZERO;
    for a in 1..q {
        let angle = 2.0 * PI * a as f64 / q as f64;
        tau = tau.add(chi_c64(chi.value(a)).mul(C64 { re: angle.cos(), im: angle.sin() }));
    }
    // L(1,χ) = −(τ/q) Σ χ̄(a) log(2 sin(πa/q))
    let mut s = C64::ZERO;
    for a in 1..q {
        let v = chi.value(a).conj();
        if v == ChiValue::Zero {
            continue;
        }
        let w = (2.0 * (PI * a as f64 / q as f64).sin()).ln();
        s = s.add(chi_c64(v).scale(w));
    }
    let l_closed = tau.mul(s).scale(-1.0 / q as f64);
    let closed = l_closed.norm_sq();

    // partial series with tail: N a multiple of q
    let n_terms = 20_000 * q;
    let mut partial = C64::ZERO;
    for n in 1..=n_terms {
        let v = chi.value(n);
        if v != ChiValue::Zero {
            partial = partial.add(chi_c64(v).scale(1.0 / n as f64));
        }
    }
    // tail Σ_{n>N} χ(n)/n = Σ_k (−1)^k m_k Z_{k+1}, m_k = Σ_{a=1..q} χ(a) a^k
    let mut m = [C64::ZERO; 4];
    for a in 1..=q {
        let v = chi.value(a);
        if v == ChiValue::Zero {
            continue;
        }
        let c = chi_c64(v);
        let af = a as f64;
        m[1] = m[1].add(c.scale(af));
        m[2] = m[2].add(c.scale(af * af));
        m[3] = m[3].add(c.scale(af * af * af));
    }
    let zsum = |s: f64| -> f64 {
        // Σ_{j≥0} (N + jq)^{−s}, direct to J then Euler–Maclaurin
        let nq = n_terms as f64;
        let qf = q as f64;
        let j_direct = 10_000u64;
        let mut acc = 0.0;
        for j in 0..j_direct {
            acc += (nq + j as f64 * qf).powf(-s);
        }
        let x = nq + j_direct as f64 * qf;
        acc + x.powf(1.0 - s) / (qf * (s - 1.0)) + 0.5 * x.powf(-s) + s * qf / 12.0 * x.powf(-s - 1.0)
    };
    let mut l_series = partial;
    l_series = l_series.add(m[1].scale(-zsum(2.0)));
    l_series = l_series.add(m[2].scale(zsum(3.0)));
    l_series = l_series.add(m[3].scale(-zsum(4.0)));
    let series = l_series.norm_sq();

    let delta = (closed - series).abs();
    if delta > tol {
        return Err(Error::Nonconvergence(delta, tol));
    }
    Ok(LValueProduct { value: closed, series_value: series, cross_delta: delta })
}
