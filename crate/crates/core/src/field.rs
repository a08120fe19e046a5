//! Cyclic cubic fields K/Q: defining cubic, conductor, integral basis, and
//! the ternary norm form P(y,z,t) = N(y·ω₁ + z·ω₂ + t·ω₃).
//!
//! The norm form is expanded once at construction as the determinant of the
//! multiplication-by-u matrix on the chosen basis, all arithmetic exact.

use crate::arith::perfect_square_u128;
use crate::error::{Error, Result};
use num::{BigInt, BigRational, One, Zero};

/// The three fields used throughout: conductors 7, 9, 13.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinField {
    Q7,
    Q9,
    Q13,
}

impl BuiltinField {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "q7" => Some(Self::Q7),
            "q9" => Some(Self::Q9),
            "q13" => Some(Self::Q13),
            _ => None,
        }
    }

    /// (a, b, c) of g = X³ + aX² + bX + c.
    pub fn poly(self) -> [i64; 3] {
        match self {
            Self::Q7 => [1, -2, -1],
            Self::Q9 => [0, -3, -1],
            Self::Q13 => [-1, -4, -1],
        }
    }

    pub fn all() -> [Self; 3] {
        [Self::Q7, Self::Q9, Self::Q13]
    }
}

/// Monomial exponents (i, j, k) of y^i z^j t^k in the fixed coefficient order.
pub const NORM_FORM_MONOMIALS: [(u8, u8, u8); 10] = [
    (3, 0, 0),
    (2, 1, 0),
    (2, 0, 1),
    (1, 2, 0),
    (1, 1, 1),
    (1, 0, 2),
    (0, 3, 0),
    (0, 2, 1),
    (0, 1, 2),
    (0, 0, 3),
];

/// Ternary cubic P(y,z,t) with the 10 integer coefficients in
/// [`NORM_FORM_MONOMIALS`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormForm {
    pub coeffs: [i128; 10],
}

impl NormForm {
    /// Exact evaluation; errors on i128 overflow.
    pub fn eval(&self, y: i128, z: i128, t: i128) -> Result<i128> {
        let mut acc: i128 = 0;
        for (c, &(i, j, k)) in self.coeffs.iter().zip(NORM_FORM_MONOMIALS.iter()) {
            let mut term = *c;
            for _ in 0..i {
                term = term.checked_mul(y).ok_or(Error::Overflow("norm form eval"))?;
            }
            for _ in 0..j {
                term = term.checked_mul(z).ok_or(Error::Overflow("norm form eval"))?;
            }
            for _ in 0..k {
                term = term.checked_mul(t).ok_or(Error::Overflow("norm form eval"))?;
            }
            acc = acc.checked_add(term).ok_or(Error::Overflow("norm form eval"))?;
        }
        Ok(acc)
    }

    /// P(y,z,t) mod m in [0, m).
    pub fn eval_mod(&self, y: u64, z: u64, t: u64, m: u64) -> u64 {
        let m128 = m as u128;
        let y = y as u128 % m128;
        let z = z as u128 % m128;
        let t = t as u128 % m128;
        let mut acc: u128 = 0;
        for (c, &(i, j, k)) in self.coeffs.iter().zip(NORM_FORM_MONOMIALS.iter()) {
            let cm = (c.rem_euclid(m as i128)) as u128;
            let mut term = cm;
            for _ in 0..i {
                term = term * y % m128;
            }
            for _ in 0..j {
                term = term * z % m128;
            }
            for _ in 0..k {
                term = term * t % m128;
            }
            acc = (acc + term) % m128;
        }
        acc as u64
    }
}

type Rat = BigRational;

fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Basis of the order, as rows expressing ω_i in the power basis (1, α, α²).
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Power,
    Custom([[Rat; 3]; 3]),
}

impl Basis {
    fn rows(&self) -> [[Rat; 3]; 3] {
        match self {
            Basis::Power => {
                let mut m = [[Rat::zero(), Rat::zero(), Rat::zero()],
                             [Rat::zero(), Rat::zero(), Rat::zero()],
                             [Rat::zero(), Rat::zero(), Rat::zero()]];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = Rat::one();
                }
                m
            }
            Basis::Custom(rows) => rows.clone(),
        }
    }
}

fn det3(m: &[[Rat; 3]; 3]) -> Rat {
    let t1 = &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1]);
    let t2 = &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0]);
    let t3 = &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0]);
    t1 - t2 + t3
}

fn inv3(m: &[[Rat; 3]; 3]) -> Option<[[Rat; 3]; 3]> {
    let d = det3(m);
    if d.is_zero() {
        return None;
    }
    let cof = |r1: usize, c1: usize, r2: usize, c2: usize| &m[r1][c1] * &m[r2][c2] - &m[r1][c2] * &m[r2][c1];
    let adj = [
        [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
        [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
        [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
    ];
    let mut out = adj;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v = &*v / &d;
        }
    }
    Some(out)
}

/// A cyclic cubic field with a fixed basis of an order.
#[derive(Debug, Clone)]
pub struct CubicField {
    /// (a, b, c) of the monic defining cubic g = X³ + aX² + bX + c
    pub coeffs: [i64; 3],
    /// disc(g), a positive perfect square for cyclic fields
    pub disc: i128,
    /// positive square root of the basis-order discriminant
    pub conductor_q: u64,
    pub basis: Basis,
    pub norm_form: NormForm,
    /// structure constants ω_i·ω_j = Σ c_{ijk} ω_k when the basis is
    /// multiplicatively closed over Z
    pub mult_table: Option<[[[i64; 3]; 3]; 3]>,
    /// the class-number-1 hypothesis used by the geometric density results;
    /// taken on trust, never computed
    pub principal_assumed: bool,
    /// attached when the supplied basis may generate a non-maximal order
    pub maximality_warning: Option<String>,
}

/// Discriminant of monic X³ + aX² + bX + c by the closed formula.
pub fn disc_monic_cubic(a: i64, b: i64, c: i64) -> i128 {
    let (a, b, c) = (a as i128, b as i128, c as i128);
    18 * a * b * c - 4 * a * a * a * c + a * a * b * b - 4 * b * b * b - 27 * c * c
}

/// Discriminant via the resultant of g and g′ (Sylvester determinant),
/// kept as an independent route for cross-checks.
pub fn disc_monic_cubic_via_resultant(a: i64, b: i64, c: i64) -> i128 {
    let (a, b, c) = (a as i128, b as i128, c as i128);
    // rows of the 5×5 Sylvester matrix of g = x³+ax²+bx+c, g' = 3x²+2ax+b
    let rows: [[i128; 5]; 5] = [
        [1, a, b, c, 0],
        [0, 1, a, b, c],
        [3, 2 * a, b, 0, 0],
        [0, 3, 2 * a, b, 0],
        [0, 0, 3, 2 * a, b],
    ];
    -det5(&rows)
}

fn det5(m: &[[i128; 5]; 5]) -> i128 {
    // cofactor expansion; 5×5 of small integers
    fn det_n(m: &[Vec<i128>]) -> i128 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut acc = 0i128;
        for (j, &mj) in m[0].iter().enumerate() {
            if mj == 0 {
                continue;
            }
            let minor: Vec<Vec<i128>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let s = if j % 2 == 0 { 1 } else { -1 };
            acc += s * mj * det_n(&minor);
        }
        acc
    }
    let rows: Vec<Vec<i128>> = m.iter().map(|r| r.to_vec()).collect();
    det_n(&rows)
}

fn has_rational_root(a: i64, b: i64, c: i64) -> bool {
    // monic integer cubic: any rational root is an integer dividing c
    if c == 0 {
        return true;
    }
    let mut d = 1i64;
    while d * d <= c.abs() {
        if c % d == 0 {
            for r in [d, -d, c / d, -(c / d)] {
                let (ra, rb) = (r as i128, r as i128 * r as i128);
                if rb * r as i128 + a as i128 * rb + b as i128 * ra + c as i128 == 0 {
                    return true;
                }
            }
        }
        d += 1;
    }
    false
}

/// Multiply two power-basis elements modulo g: (x0 + x1α + x2α²)(y0 + y1α + y2α²).
fn power_basis_mul(x: &[Rat; 3], y: &[Rat; 3], a: i64, b: i64, c: i64) -> [Rat; 3] {
    // raw degree-4 product coefficients
    let mut raw = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
    for i in 0..3 {
        for j in 0..3 {
            raw[i + j] = &raw[i + j] + &x[i] * &y[j];
        }
    }
    // reduce α³ = −aα² − bα − c, then α⁴ = −aα³ − bα² − cα
    let (ra, rb, rc) = (rat(a), rat(b), rat(c));
    // fold degree 4 into 3 first
    let d4 = raw[4].clone();
    raw[3] = &raw[3] - &ra * &d4;
    raw[2] = &raw[2] - &rb * &d4;
    raw[1] = &raw[1] - &rc * &d4;
    let d3 = raw[3].clone();
    raw[2] = &raw[2] - &ra * &d3;
    raw[1] = &raw[1] - &rb * &d3;
    raw[0] = &raw[0] - &rc * &d3;
    [raw[0].clone(), raw[1].clone(), raw[2].clone()]
}

impl CubicField {
    pub fn builtin(which: BuiltinField) -> CubicField {
        let [a, b, c] = which.poly();
        let mut field = Self::new([a, b, c], None).expect("builtin fields are valid");
        field.principal_assumed = true;
        field.maximality_warning = None;
        field
    }

    /// Construct a field from a monic cubic and an optional basis (rows in the
    /// power basis). With no basis the power basis is used.
    pub fn new(coeffs: [i64; 3], basis: Option<[[Rat; 3]; 3]>) -> Result<CubicField> {
        let [a, b, c] = coeffs;
        if has_rational_root(a, b, c) {
            return Err(Error::NotIrreducible);
        }
        let disc = disc_monic_cubic(a, b, c);
        if disc <= 0 {
            return Err(Error::NotCyclic(disc));
        }
        let Some(_) = perfect_square_u128(disc as u128) else {
            return Err(Error::NotCyclic(disc));
        };
        let basis = match basis {
            None => Basis::Power,
            Some(rows) => Basis::Custom(rows),
        };
        let rows = basis.rows();
        let det = det3(&rows);
        if det.is_zero() {
            return Err(Error::BadBasis("basis determinant is zero".into()));
        }
        // order discriminant = det(B)² · disc(g) must be a positive integer square
        let order_disc = &det * &det * Rat::from_integer(BigInt::from(disc));
        if !order_disc.is_integer() {
            return Err(Error::BadBasis(format!(
                "order discriminant {order_disc} is not an integer"
            )));
        }
        let od: BigInt = order_disc.to_integer();
        let od_u: u128 = od
            .magnitude()
            .try_into()
            .map_err(|_| Error::Overflow("order discriminant"))?;
        let Some(q128) = perfect_square_u128(od_u) else {
            return Err(Error::BadBasis(format!(
                "order discriminant {od} is not a perfect square"
            )));
        };
        let conductor_q = u64::try_from(q128).map_err(|_| Error::Overflow("conductor"))?;

        // structure constants in the ω basis
        let inv = inv3(&rows).expect("nonzero determinant");
        let mut table_rat = vec![[Rat::zero(), Rat::zero(), Rat::zero()]; 9];
        for i in 0..3 {
            for j in 0..3 {
                let prod = power_basis_mul(&rows[i], &rows[j], a, b, c);
                // coordinates in ω basis: x = prod · B^{-1} (row vector)
                for k in 0..3 {
                    let mut acc = Rat::zero();
                    for (l, p) in prod.iter().enumerate() {
                        acc = &acc + p * &inv[l][k];
                    }
                    table_rat[3 * i + j][k] = acc;
                }
            }
        }
        let mut mult_table = Some([[[0i64; 3]; 3]; 3]);
        'integrality: for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v = &table_rat[3 * i + j][k];
                    if v.is_integer() {
                        if let Some(t) = mult_table.as_mut() {
                            t[i][j][k] = i64::try_from(v.to_integer())
                                .map_err(|_| Error::Overflow("structure constants"))?;
                        }
                    } else {
                        mult_table = None;
                        break 'integrality;
                    }
                }
            }
        }

        // norm form: det of multiplication-by-u matrix, u = yω₁ + zω₂ + tω₃.
        // column j of M(u) holds the ω-coordinates of u·ω_j, each entry a
        // linear form in (y, z, t).
        let lin = |k: usize, j: usize| -> [Rat; 3] {
            // coefficient of ω_k in ω_i·ω_j for i = 0,1,2
            [
                table_rat[j][k].clone(),
                table_rat[3 + j][k].clone(),
                table_rat[6 + j][k].clone(),
            ]
        };
        let mut coeffs10 = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero(),
                            Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero(), Rat::zero()];
        // det over permutations of a 3×3 with linear-form entries
        const PERMS: [([usize; 3], i64); 6] = [
            ([0, 1, 2], 1),
            ([1, 2, 0], 1),
            ([2, 0, 1], 1),
            ([0, 2, 1], -1),
            ([2, 1, 0], -1),
            ([1, 0, 2], -1),
        ];
        for (perm, sign) in PERMS {
            let l0 = lin(0, perm[0]);
            let l1 = lin(1, perm[1]);
            let l2 = lin(2, perm[2]);
            for (i0, c0) in l0.iter().enumerate() {
                if c0.is_zero() {
                    continue;
                }
                for (i1, c1) in l1.iter().enumerate() {
                    if c1.is_zero() {
                        continue;
                    }
                    for (i2, c2) in l2.iter().enumerate() {
                        if c2.is_zero() {
                            continue;
                        }
                        let mut e = [0u8; 3];
                        e[i0] += 1;
                        e[i1] += 1;
                        e[i2] += 1;
                        let idx = NORM_FORM_MONOMIALS
                            .iter()
                            .position(|&(x, y, z)| (x, y, z) == (e[0], e[1], e[2]))
                            .unwrap();
                        coeffs10[idx] = &coeffs10[idx] + &(c0 * c1) * c2 * rat(sign);
                    }
                }
            }
        }
        let mut nf_coeffs = [0i128; 10];
        for (dst, src) in nf_coeffs.iter_mut().zip(coeffs10.iter()) {
            if !src.is_integer() {
                return Err(Error::BadBasis(format!(
                    "norm form coefficient {src} is not an integer"
                )));
            }
            *dst = i128::try_from(src.to_integer()).map_err(|_| Error::Overflow("norm form"))?;
        }

        let maximality_warning = match basis {
            Basis::Power if conductor_conformant(conductor_q) => None,
            _ => Some(format!(
                "conductor {conductor_q} taken as sqrt of the order discriminant; \
                 the order was not verified maximal"
            )),
        };
        Ok(CubicField {
            coeffs,
            disc,
            conductor_q,
            basis,
            norm_form: NormForm { coeffs: nf_coeffs },
            mult_table,
            principal_assumed: false,
            maximality_warning,
        })
    }

    /// g(x) mod p root count: 0 or 3 for unramified p in a cyclic cubic.
    pub fn root_count_mod_p(&self, p: u64) -> u32 {
        let [a, b, c] = self.coeffs;
        let pm = p as i128;
        let mut count = 0;
        for x in 0..p as i128 {
            let v = ((x * x % pm * x + a as i128 * x % pm * x + b as i128 * x + c as i128) % pm + pm) % pm;
            if v == 0 {
                count += 1;
            }
        }
        count
    }

    /// N(u·v) via the multiplication table; coordinates of the product.
    pub fn multiply_on_basis(&self, u: [i64; 3], v: [i64; 3]) -> Option<[i128; 3]> {
        let table = self.mult_table?;
        let mut out = [0i128; 3];
        for i in 0..3 {
            for j in 0..3 {
                let uv = u[i] as i128 * v[j] as i128;
                for (k, o) in out.iter_mut().enumerate() {
                    *o += uv * table[i][j][k] as i128;
                }
            }
        }
        Some(out)
    }

    /// Exact P(y,z,t), reduced mod `modulus` when given.
    pub fn norm_form_eval(&self, y: i64, z: i64, t: i64, modulus: Option<u64>) -> Result<i128> {
        match modulus {
            None => self.norm_form.eval(y as i128, z as i128, t as i128),
            Some(m) => {
                let red = |v: i64| -> u64 { (v as i128).rem_euclid(m as i128) as u64 };
                Ok(self.norm_form.eval_mod(red(y), red(z), red(t), m) as i128)
            }
        }
    }
}

/// Does q have the shape of a cyclic cubic conductor (9^{0,1}·Π distinct
/// primes ≡ 1 mod 3)?
fn conductor_conformant(q: u64) -> bool {
    let Ok(f) = crate::arith::factor(q) else { return false };
    f.pairs.iter().all(|&(p, e)| {
        if p == 3 {
            e == 2
        } else {
            e == 1 && p % 3 == 1
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn builtin_discs_and_conductors() {
        let cases = [
            (BuiltinField::Q7, 49i128, 7u64),
            (BuiltinField::Q9, 81, 9),
            (BuiltinField::Q13, 169, 13),
        ];
        for (which, disc, q) in cases {
            let f = CubicField::builtin(which);
            assert_eq!(f.disc, disc);
            assert_eq!(f.conductor_q, q);
            assert!(matches!(f.basis, Basis::Power));
            assert!(f.mult_table.is_some());
            assert!(f.maximality_warning.is_none());
        }
    }

    #[test]
    fn disc_two_routes_agree() {
        for a in -5..=5i64 {
            for b in -5..=5i64 {
                for c in -5..=5i64 {
                    assert_eq!(
                        disc_monic_cubic(a, b, c),
                        disc_monic_cubic_via_resultant(a, b, c),
                        "a={a} b={b} c={c}"
                    );
                }
            }
        }
    }

    #[test]
    fn norm_of_one_and_alpha() {
        for which in BuiltinField::all() {
            let f = CubicField::builtin(which);
            assert_eq!(f.norm_form_eval(1, 0, 0, None).unwrap(), 1, "N(1) = 1");
            // N(α) = −g(0) = −c for a monic cubic
            let expect = -(f.coeffs[2] as i128);
            assert_eq!(f.norm_form_eval(0, 1, 0, None).unwrap(), expect);
        }
    }

    #[test]
    fn homogeneity_degree_three() {
        let f = CubicField::builtin(BuiltinField::Q7);
        assert_eq!(f.norm_form_eval(2, 0, 0, None).unwrap(), 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (y, z, t) = (rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64));
            let lam = rng.gen_range(-5..=5i64);
            let base = f.norm_form_eval(y, z, t, None).unwrap();
            let scaled = f.norm_form_eval(lam * y, lam * z, lam * t, None).unwrap();
            assert_eq!(scaled, (lam as i128).pow(3) * base);
        }
    }

    #[test]
    fn norm_multiplicativity_random_pairs() {
        for which in BuiltinField::all() {
            let f = CubicField::builtin(which);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(u64::from(which as u8));
            for _ in 0..1000 {
                let u = [rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64)];
                let v = [rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64), rng.gen_range(-9..=9i64)];
                let uv = f.multiply_on_basis(u, v).unwrap();
                let nu = f.norm_form_eval(u[0], u[1], u[2], None).unwrap();
                let nv = f.norm_form_eval(v[0], v[1], v[2], None).unwrap();
                let nuv = f
                    .norm_form
                    .eval(uv[0], uv[1], uv[2])
                    .unwrap();
                assert_eq!(nuv, nu * nv, "field {which:?}, u={u:?}, v={v:?}");
            }
        }
    }

    #[test]
    fn make_field_matches_builtin() {
        let f = CubicField::new([1, -2, -1], None).unwrap();
        let b = CubicField::builtin(BuiltinField::Q7);
        assert_eq!(f.conductor_q, b.conductor_q);
        assert_eq!(f.norm_form, b.norm_form);
    }

    #[test]
    fn make_field_rejections() {
        // X³ − 2: disc −108, not cyclic
        assert!(matches!(CubicField::new([0, 0, -2], None), Err(Error::NotCyclic(-108))));
        // X³ − X: rational roots
        assert!(matches!(CubicField::new([0, -1, 0], None), Err(Error::NotIrreducible)));
        // singular basis
        let rows = [
            [rat(1), rat(0), rat(0)],
            [rat(0), rat(1), rat(0)],
            [rat(0), rat(1), rat(0)],
        ];
        assert!(matches!(
            CubicField::new([0, -3, -1], Some(rows)),
            Err(Error::BadBasis(_))
        ));
    }

    #[test]
    fn make_field_conductor_q9() {
        let f = CubicField::new([0, -3, -1], None).unwrap();
        assert_eq!(f.conductor_q, 9);
    }

    #[test]
    fn scaled_basis_changes_conductor() {
        // ω = (1, α, 2α²): det 2, order disc = 4·81, conductor 18,
        // with a maximality warning attached
        let rows = [
            [rat(1), rat(0), rat(0)],
            [rat(0), rat(1), rat(0)],
            [rat(0), rat(0), rat(2)],
        ];
        let f = CubicField::new([0, -3, -1], Some(rows)).unwrap();
        assert_eq!(f.conductor_q, 18);
        assert!(f.maximality_warning.is_some());
    }

    #[test]
    fn eval_mod_matches_exact() {
        let f = CubicField::builtin(BuiltinField::Q13);
        for m in [2u64, 7, 9, 64, 169] {
            for y in -3..=3i64 {
                for z in -3..=3i64 {
                    for t in -3..=3i64 {
                        let exact = f.norm_form_eval(y, z, t, None).unwrap();
                        let red = f.norm_form_eval(y, z, t, Some(m)).unwrap();
                        assert_eq!(exact.rem_euclid(m as i128), red);
                    }
                }
            }
        }
    }

    #[test]
    fn root_counts_track_splitting() {
        let f = CubicField::builtin(BuiltinField::Q7);
        // 13 ≡ 6 mod 7 splits; 2, 3, 5 do not
        assert_eq!(f.root_count_mod_p(13), 3);
        assert_eq!(f.root_count_mod_p(2), 0);
        assert_eq!(f.root_count_mod_p(3), 0);
        assert_eq!(f.root_count_mod_p(5), 0);
        assert_eq!(f.root_count_mod_p(29), 3); // 29 ≡ 1 mod 7
    }
}
