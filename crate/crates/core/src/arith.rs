//! Integer factorization at desk scale and the multiplicative functions
//! r₃ = 1*χ*χ², (χ*χ²)(p^k), τ₃ and ω.
//!
//! Factorization: trial division to 10⁴, then Pollard rho with Brent cycles,
//! primality certified by deterministic Miller–Rabin for the 64-bit range.

use crate::character::{ChiValue, CubicCharacter, EisensteinInt};
use crate::error::{Error, Result};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::Mutex;

pub const TRIAL_DIVISION_BOUND: u64 = 10_000;

/// Bounded memo for factorizations; the census hits the same small values
/// over and over. Cap 2^20 entries, no eviction.
const MEMO_SHARDS: usize = 64;
const MEMO_CAP_PER_SHARD: usize = (1 << 20) / MEMO_SHARDS;
static FACTOR_MEMO: Lazy<Vec<Mutex<HashMap<u64, Vec<(u64, u32)>>>>> =
    Lazy::new(|| (0..MEMO_SHARDS).map(|_| Mutex::new(HashMap::new())).collect());

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// Modular inverse of `a` mod `m` for gcd(a, m) = 1.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(((s0 % m as i128 + m as i128) % m as i128) as u64)
}

/// Floor of the integer square root.
pub fn isqrt_u64(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64 + 1;
    while x * x > n {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).map_or(false, |s| s <= n) {
        x += 1;
    }
    x
}

pub fn isqrt_u128(n: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u128 + 2;
    while x.checked_mul(x).map_or(true, |s| s > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).map_or(false, |s| s <= n) {
        x += 1;
    }
    x
}

/// n = s² test; returns s when n is a perfect square.
pub fn perfect_square_u128(n: u128) -> Option<u128> {
    let s = isqrt_u128(n);
    (s * s == n).then_some(s)
}

/// Deterministic Miller–Rabin, complete for the 64-bit range.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return vec![];
    }
    let n = limit as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut p = 2usize;
    while p * p <= n {
        if sieve[p] {
            let mut m = p * p;
            while m <= n {
                sieve[m] = false;
                m += p;
            }
        }
        p += 1;
    }
    (2..=n).filter(|&i| sieve[i]).map(|i| i as u64).collect()
}

/// Smallest-prime-factor table for bulk factorization of all n ≤ limit.
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut m = i;
                while m <= limit {
                    if spf[m] == 0 {
                        spf[m] = i as u32;
                    }
                    m += i;
                }
            }
        }
        Self { spf }
    }

    pub fn factor(&self, mut n: u64) -> Vec<(u64, u32)> {
        assert!((n as usize) < self.spf.len());
        let mut pairs = Vec::new();
        while n > 1 {
            let p = self.spf[n as usize] as u64;
            let mut e = 0u32;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            pairs.push((p, e));
        }
        pairs
    }
}

fn brent_rho(n: u64) -> u64 {
    // n odd composite, not a prime power of a trial prime
    let mut c = 1u64;
    loop {
        let mut x = 2u64;
        let mut y = 2u64;
        let mut d = 1u64;
        let mut q = 1u64;
        let mut r = 1u64;
        let mut ys = y;
        'outer: while d == 1 {
            x = y;
            for _ in 0..r {
                y = mul_mod(y, y, n).wrapping_add(c) % n;
            }
            let mut k = 0u64;
            while k < r && d == 1 {
                ys = y;
                let lim = 128.min(r - k);
                for _ in 0..lim {
                    y = mul_mod(y, y, n).wrapping_add(c) % n;
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                d = gcd_u64(q, n);
                k += lim;
            }
            r *= 2;
            if r > (1 << 40) {
                break 'outer;
            }
        }
        if d == n {
            // backtrack one step at a time
            loop {
                ys = mul_mod(ys, ys, n).wrapping_add(c) % n;
                d = gcd_u64(x.abs_diff(ys), n);
                if d > 1 {
                    break;
                }
            }
        }
        if d > 1 && d < n {
            return d;
        }
        c += 1;
    }
}

fn factor_rec(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        out.push(n);
        return;
    }
    let d = brent_rho(n);
    factor_rec(d, out);
    factor_rec(n / d, out);
}

/// Complete factorization of n, sorted ascending by prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub n: u64,
    pub pairs: Vec<(u64, u32)>,
}

impl Factorization {
    /// Π p^e reconstructs n; asserted at construction.
    pub fn product(&self) -> u64 {
        self.pairs
            .iter()
            .fold(1u64, |acc, &(p, e)| acc * p.pow(e))
    }

    /// All divisors, sorted ascending.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.pairs {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> u32 {
        self.pairs.len() as u32
    }

    /// Ordered triples (a,b,c) with abc = n: Π C(e+2, 2).
    pub fn tau3(&self) -> u64 {
        self.pairs
            .iter()
            .fold(1u64, |acc, &(_, e)| acc * ((e as u64 + 1) * (e as u64 + 2) / 2))
    }
}

/// Factor n ≥ 1. Trial division to 10⁴, then Brent rho; results memoized.
pub fn factor(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Validation("factor(0) is undefined".into()));
    }
    if n == 1 {
        return Ok(Factorization { n, pairs: vec![] });
    }
    let shard = (n as usize) & (MEMO_SHARDS - 1);
    if let Some(pairs) = FACTOR_MEMO[shard].lock().unwrap().get(&n) {
        return Ok(Factorization { n, pairs: pairs.clone() });
    }

    let mut m = n;
    let mut primes = Vec::new();
    for p in [2u64, 3, 5] {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
    }
    let mut d = 7u64;
    let mut step = [4u64, 2, 4, 2, 4, 6, 2, 6].iter().cycle();
    while d <= TRIAL_DIVISION_BOUND && d * d <= m {
        while m % d == 0 {
            primes.push(d);
            m /= d;
        }
        d += step.next().unwrap();
    }
    if m > 1 {
        if m <= TRIAL_DIVISION_BOUND * TRIAL_DIVISION_BOUND {
            primes.push(m); // below the trial bound squared, the cofactor is prime
        } else {
            factor_rec(m, &mut primes);
        }
    }
    primes.sort_unstable();
    let mut pairs: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match pairs.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => pairs.push((p, 1)),
        }
    }
    let fact = Factorization { n, pairs };
    debug_assert_eq!(fact.product(), n);
    {
        let mut memo = FACTOR_MEMO[shard].lock().unwrap();
        if memo.len() < MEMO_CAP_PER_SHARD {
            memo.insert(n, fact.pairs.clone());
        }
    }
    Ok(fact)
}

/// (χ*χ²)(p^k): 1 at k = 0; for p | q zero for k ≥ 1; k+1 when χ(p) = 1;
/// otherwise the period-3 pattern 1, −1, 0.
pub fn chi_conv_pk(chi: &CubicCharacter, p: u64, k: u32) -> i64 {
    if k == 0 {
        return 1;
    }
    match chi.value(p) {
        ChiValue::Zero => 0,
        ChiValue::One => k as i64 + 1,
        _ => match k % 3 {
            0 => 1,
            1 => -1,
            _ => 0,
        },
    }
}

/// r₃(p^k) = Σ_{j ≤ k} (χ*χ²)(p^j).
/// Split p: (k+1)(k+2)/2. Non-split p coprime to q: 1 iff 3 | k.
/// p | q: 1 for every k (only the j = 0 term survives).
pub fn r3_pk(chi: &CubicCharacter, p: u64, k: u32) -> u64 {
    match chi.value(p) {
        ChiValue::Zero => 1,
        ChiValue::One => (k as u64 + 1) * (k as u64 + 2) / 2,
        _ => u64::from(k % 3 == 0),
    }
}

/// r₃(n) = (1*χ*χ²)(n): the number of ideals of norm n. Multiplicative
/// evaluation over the factorization of n.
pub fn r3(chi: &CubicCharacter, n: u64) -> Result<u64> {
    let f = factor(n)?;
    Ok(f.pairs.iter().map(|&(p, e)| r3_pk(chi, p, e)).product())
}

/// Same as [`r3`] but reusing an existing factorization.
pub fn r3_of_factorization(chi: &CubicCharacter, f: &Factorization) -> u64 {
    f.pairs.iter().map(|&(p, e)| r3_pk(chi, p, e)).product()
}

/// Direct triple divisor sum Σ_{abc=n} χ(b)χ²(c), evaluated in Z[ω].
/// This is the oracle for [`r3`]; the imaginary part must vanish exactly.
pub fn r3_brute(chi: &CubicCharacter, n: u64) -> Result<u64> {
    if n > 1_000_000 {
        return Err(Error::OracleScale(format!("r3_brute(n = {n}) exceeds 10^6")));
    }
    let divs = factor(n)?.divisors();
    let mut acc = EisensteinInt::ZERO;
    for &b in &divs {
        let cb = chi.value(b);
        if cb == ChiValue::Zero {
            continue;
        }
        let rest = n / b;
        for &c in &divs {
            if rest % c == 0 {
                acc += (cb * chi.value(c).pow(2)).to_eisenstein();
            }
        }
    }
    assert_eq!(acc.b, 0, "r3_brute({n}): sum is not real: {acc:?}");
    assert!(acc.a >= 0, "r3_brute({n}): negative ideal count: {acc:?}");
    Ok(acc.a as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::character::CubicCharacter;
    use crate::field::{BuiltinField, CubicField};

    fn chi7() -> CubicCharacter {
        CubicCharacter::for_field(&CubicField::builtin(BuiltinField::Q7)).unwrap()
    }

    #[test]
    fn r3_prime_power_values() {
        let chi = chi7();
        // split p: 1 + 1 + 1
        assert_eq!(r3(&chi, 13).unwrap(), 3);
        assert_eq!(r3(&chi, 29).unwrap(), 3);
        // non-split p coprime to q: 1 + ω + ω² = 0
        assert_eq!(r3(&chi, 2).unwrap(), 0);
        assert_eq!(r3(&chi, 3).unwrap(), 0);
        assert_eq!(r3(&chi, 8).unwrap(), 1); // k = 3 ≡ 0 mod 3
        // ramified: only the j = 0 term survives at every exponent
        for k in 0..=5u32 {
            assert_eq!(r3(&chi, 7u64.pow(k)).unwrap(), 1, "k = {k}");
        }
        // split squares: (k+1)(k+2)/2
        assert_eq!(r3(&chi, 13 * 13).unwrap(), 6);
    }

    #[test]
    fn chi_conv_examples() {
        let chi = chi7();
        assert_eq!(chi_conv_pk(&chi, 13, 2), 3); // split: k + 1
        assert_eq!(chi_conv_pk(&chi, 2, 1), -1); // non-split k ≡ 1
        assert_eq!(chi_conv_pk(&chi, 2, 2), 0); // non-split k ≡ 2
        assert_eq!(chi_conv_pk(&chi, 2, 3), 1);
        assert_eq!(chi_conv_pk(&chi, 7, 0), 1);
        assert_eq!(chi_conv_pk(&chi, 7, 4), 0);
    }

    #[test]
    fn r3_brute_small_values() {
        let chi = chi7();
        assert_eq!(r3_brute(&chi, 1).unwrap(), 1);
        for n in 1..=3000u64 {
            assert_eq!(r3(&chi, n).unwrap(), r3_brute(&chi, n).unwrap(), "n = {n}");
        }
        // q-smooth dilation invariance through the oracle
        for n in [10u64, 91, 360] {
            assert_eq!(r3_brute(&chi, 7 * n).unwrap(), r3_brute(&chi, n).unwrap());
        }
    }

    #[test]
    fn factor_basics() {
        assert_eq!(factor(1).unwrap().pairs, vec![]);
        assert_eq!(factor(49).unwrap().pairs, vec![(7, 2)]);
        assert_eq!(
            factor(360).unwrap().pairs,
            vec![(2, 3), (3, 2), (5, 1)]
        );
        let n = 2_000_000_000_033u64; // beyond the trial bound squared
        let f = factor(n).unwrap();
        assert_eq!(f.product(), n);
        for &(p, _) in &f.pairs {
            assert!(is_prime_u64(p));
        }
    }

    #[test]
    fn factor_product_oracle() {
        let n = 2 * 10u64.pow(12) + 33;
        let f = factor(n).unwrap();
        assert_eq!(f.product(), n);
        for &(p, _) in &f.pairs {
            assert!(is_prime_u64(p));
        }
    }

    #[test]
    fn factor_hard_semiprimes() {
        for &n in &[
            10_000_019u64 * 10_000_079,
            4_294_967_291u64 * 4_294_967_279, // two ~32-bit primes
        ] {
            let f = factor(n).unwrap();
            assert_eq!(f.product(), n);
            assert_eq!(f.pairs.len(), 2);
        }
    }

    #[test]
    fn divisors_sorted_and_complete() {
        let f = factor(360).unwrap();
        let d = f.divisors();
        assert_eq!(d.len(), 24);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert!(d.iter().all(|&x| 360 % x == 0));
        assert_eq!(f.tau3(), 10 * 6 * 3);
        assert_eq!(f.omega(), 3);
    }

    #[test]
    fn miller_rabin_agrees_with_sieve() {
        let primes = primes_up_to(5000);
        let mut i = 0;
        for n in 0..5000u64 {
            let in_sieve = i < primes.len() && primes[i] == n;
            if in_sieve {
                i += 1;
            }
            assert_eq!(is_prime_u64(n), in_sieve, "n = {n}");
        }
    }

    #[test]
    fn isqrt_exact() {
        for n in 0..10_000u64 {
            let s = isqrt_u64(n);
            assert!(s * s <= n && (s + 1) * (s + 1) > n);
        }
        assert_eq!(perfect_square_u128(49), Some(7));
        assert_eq!(perfect_square_u128(48), None);
    }

    #[test]
    fn spf_table_matches_factor() {
        let spf = SpfTable::new(2000);
        for n in 2..=2000u64 {
            assert_eq!(spf.factor(n), factor(n).unwrap().pairs, "n = {n}");
        }
    }

    #[test]
    fn inv_mod_works() {
        for m in 2..200u64 {
            for a in 1..m {
                if gcd_u64(a, m) == 1 {
                    let inv = inv_mod(a, m).unwrap();
                    assert_eq!(mul_mod(a, inv, m), 1 % m);
                } else {
                    assert!(inv_mod(a, m).is_none());
                }
            }
        }
    }
}
