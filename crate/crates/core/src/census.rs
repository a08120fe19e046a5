//! The headline computation: empirical Q(F,ξ,R) = Σ r₃(|F(x)|) over
//! Z² ∩ R(ξ) against the predicted main term K(F)·L(1,χ)L(1,χ²)·vol(R)·ξ².
//!
//! Region membership is decided by exact rational comparisons, so every
//! count is an exact integer. Ideals have positive norm: r₃ is evaluated at
//! |F(x)| and the origin (where F vanishes) is excluded from every scan.

use crate::arith::{factor, r3_of_factorization};
use crate::character::{CubicCharacter, LValueProduct};
use crate::congruence::{h4_check, BinaryCubicForm};
use crate::density::DensityReport;
use crate::error::{Error, Result};
use crate::field::CubicField;
use num::rational::Ratio;
use num::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Origin-centered region: open bounded convex with C¹ boundary by
/// construction. Closed membership (≤) is used for lattice counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Disc { radius: Ratio<i64> },
    Ellipse { a: Ratio<i64>, b: Ratio<i64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpec {
    pub kind: RegionKind,
}

fn check_param(r: Ratio<i64>, what: &str) -> Result<()> {
    if r <= Ratio::zero() {
        return Err(Error::Validation(format!("{what} must be positive")));
    }
    if r.numer().abs() > 100_000 || *r.denom() > 10_000 {
        return Err(Error::Validation(format!(
            "{what} = {r} beyond supported scale"
        )));
    }
    Ok(())
}

pub fn check_xi(xi: Ratio<i64>) -> Result<()> {
    if xi <= Ratio::zero() {
        return Err(Error::Validation("xi must be positive".into()));
    }
    if xi.numer().abs() > 10_000_000 || *xi.denom() > 10_000 {
        return Err(Error::Validation(format!("xi = {xi} beyond supported scale")));
    }
    Ok(())
}

/// Parse a decimal like "1.0" or "0.75" into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let s = s.trim();
    let bad = || Error::Validation(format!("cannot parse '{s}' as a decimal"));
    let (int_part, frac_part) = match s.split_once('.') {
        None => (s, ""),
        Some((i, f)) => (i, f),
    };
    if frac_part.len() > 9 {
        return Err(Error::Validation(format!("'{s}': too many decimal digits")));
    }
    let neg = int_part.starts_with('-');
    let int_digits = int_part.trim_start_matches(['-', '+']);
    let whole: i64 = if int_digits.is_empty() { 0 } else { int_digits.parse().map_err(|_| bad())? };
    let den = 10i64.pow(frac_part.len() as u32);
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let num = whole.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
    Ok(Ratio::new(if neg { -num } else { num }, den))
}

impl RegionSpec {
    pub fn unit_disc() -> Self {
        Self { kind: RegionKind::Disc { radius: Ratio::new(1, 1) } }
    }

    pub fn disc(radius: Ratio<i64>) -> Result<Self> {
        check_param(radius, "disc radius")?;
        Ok(Self { kind: RegionKind::Disc { radius } })
    }

    pub fn ellipse(a: Ratio<i64>, b: Ratio<i64>) -> Result<Self> {
        check_param(a, "ellipse semi-axis")?;
        check_param(b, "ellipse semi-axis")?;
        Ok(Self { kind: RegionKind::Ellipse { a, b } })
    }

    /// "disc:1.0" or "ellipse:1.5,0.75"
    pub fn parse(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("disc", r)) => Self::disc(parse_ratio(r)?),
            Some(("ellipse", ab)) => {
                let (a, b) = ab
                    .split_once(',')
                    .ok_or_else(|| Error::Validation("ellipse needs two semi-axes".into()))?;
                Self::ellipse(parse_ratio(a)?, parse_ratio(b)?)
            }
            _ => Err(Error::Validation(format!(
                "unknown region '{s}' (use disc:R or ellipse:A,B)"
            ))),
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            RegionKind::Disc { radius } => format!("disc:{radius}"),
            RegionKind::Ellipse { a, b } => format!("ellipse:{a},{b}"),
        }
    }

    /// vol(R); vol(R(ξ)) = ξ²·vol(R) exactly.
    pub fn vol(&self) -> f64 {
        match self.kind {
            RegionKind::Disc { radius } => {
                let r = ratio_to_f64(radius);
                std::f64::consts::PI * r * r
            }
            RegionKind::Ellipse { a, b } => {
                std::f64::consts::PI * ratio_to_f64(a) * ratio_to_f64(b)
            }
        }
    }

    /// σ = sup ‖x‖ on R.
    pub fn sigma(&self) -> f64 {
        match self.kind {
            RegionKind::Disc { radius } => ratio_to_f64(radius),
            RegionKind::Ellipse { a, b } => ratio_to_f64(a.max(b)),
        }
    }

    /// ϑ = (sup_R |F|)^{1/3} by boundary sampling with a 1% safety margin;
    /// |F| is homogeneous so the sup sits on the boundary.
    pub fn theta(&self, form: &BinaryCubicForm) -> f64 {
        let n = 4096;
        let mut max_abs: f64 = 0.0;
        let [a0, a1, a2, a3] = form.coeffs.map(|c| c as f64);
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (x, y) = match self.kind {
                RegionKind::Disc { radius } => {
                    let r = ratio_to_f64(radius);
                    (r * t.cos(), r * t.sin())
                }
                RegionKind::Ellipse { a, b } => {
                    (ratio_to_f64(a) * t.cos(), ratio_to_f64(b) * t.sin())
                }
            };
            let v = ((a0 * x + a1 * y) * x + a2 * y * y) * x + a3 * y * y * y;
            max_abs = max_abs.max(v.abs());
        }
        (max_abs * 1.01).cbrt()
    }

    /// Exact membership of the lattice point (m, n) in the closed R(ξ).
    pub fn contains(&self, m: i64, n: i64, xi: Ratio<i64>) -> bool {
        let (m, n) = (m as i128, n as i128);
        match self.kind {
            RegionKind::Disc { radius } => {
                let num = (*radius.numer() as i128) * (*xi.numer() as i128);
                let den = (*radius.denom() as i128) * (*xi.denom() as i128);
                (m * m + n * n) * den * den <= num * num
            }
            RegionKind::Ellipse { a, b } => {
                let an = (*a.numer() as i128) * (*xi.numer() as i128);
                let ad = (*a.denom() as i128) * (*xi.denom() as i128);
                let bn = (*b.numer() as i128) * (*xi.numer() as i128);
                let bd = (*b.denom() as i128) * (*xi.denom() as i128);
                m * m * ad * ad * bn * bn + n * n * bd * bd * an * an <= an * an * bn * bn
            }
        }
    }

    /// Scan bound: every point of R(ξ) has |m| ≤ x_bound.
    pub fn x_bound(&self, xi: Ratio<i64>) -> i64 {
        let s = match self.kind {
            RegionKind::Disc { radius } => radius * xi,
            RegionKind::Ellipse { a, b: _ } => a * xi,
        };
        (s.numer() / s.denom()) + 1
    }

    pub fn y_bound(&self, xi: Ratio<i64>) -> i64 {
        let s = match self.kind {
            RegionKind::Disc { radius } => radius * xi,
            RegionKind::Ellipse { a: _, b } => b * xi,
        };
        (s.numer() / s.denom()) + 1
    }

    /// Largest h ≥ 0 with (m, ±h) ∈ R(ξ); None when the row misses R(ξ).
    /// Float guess, then exact fix-up.
    pub fn row_half_width(&self, m: i64, xi: Ratio<i64>) -> Option<i64> {
        if !self.contains(m, 0, xi) {
            return None;
        }
        let xif = ratio_to_f64(xi);
        let guess = match self.kind {
            RegionKind::Disc { radius } => {
                let r = ratio_to_f64(radius) * xif;
                (r * r - (m as f64) * (m as f64)).max(0.0).sqrt()
            }
            RegionKind::Ellipse { a, b } => {
                let av = ratio_to_f64(a) * xif;
                let bv = ratio_to_f64(b) * xif;
                let t = 1.0 - (m as f64 / av) * (m as f64 / av);
                (t.max(0.0)).sqrt() * bv
            }
        };
        let mut h = guess as i64;
        while self.contains(m, h + 1, xi) {
            h += 1;
        }
        while h > 0 && !self.contains(m, h, xi) {
            h -= 1;
        }
        Some(h)
    }

    /// Region with the two axes swapped (used by the column-scan cross-check).
    pub fn transposed(&self) -> Self {
        match self.kind {
            RegionKind::Disc { .. } => *self,
            RegionKind::Ellipse { a, b } => Self { kind: RegionKind::Ellipse { a: b, b: a } },
        }
    }

    /// Total lattice points of R(ξ), origin included.
    pub fn lattice_point_count(&self, xi: Ratio<i64>) -> u64 {
        let mut count = 0u64;
        for m in -self.x_bound(xi)..=self.x_bound(xi) {
            if let Some(h) = self.row_half_width(m, xi) {
                count += 2 * h as u64 + 1;
            }
        }
        count
    }
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rigorous upper bound for |F| on the lattice points of R(ξ):
/// Σ|aᵢ|·Bx^{3−i}·By^{i} with the per-axis scan bounds.
pub fn lattice_sup_abs_form(form: &BinaryCubicForm, region: &RegionSpec, xi: Ratio<i64>) -> u128 {
    let bx = region.x_bound(xi) as u128;
    let by = region.y_bound(xi) as u128;
    let [a0, a1, a2, a3] = form.coeffs.map(|c| c.unsigned_abs() as u128);
    a0 * bx * bx * bx + a1 * bx * bx * by + a2 * bx * by * by + a3 * by * by * by
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traversal {
    Rows,
    Columns,
}

const POINT_BUDGET: u64 = 450_000_000;

/// Q(F,ξ,R) = Σ_{x ∈ Z²∩R(ξ), x ≠ 0} r₃(|F(x)|), exact.
///
/// Under H4 the form has no nonzero lattice zero; hitting one is a hard
/// error because it falsifies the irreducibility check.
pub fn q_empirical(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    region: &RegionSpec,
    xi: Ratio<i64>,
    order: Traversal,
) -> Result<u64> {
    check_xi(xi)?;
    let (scan_region, scan_form) = match order {
        Traversal::Rows => (*region, *form),
        // column scan: swap the roles of the coordinates
        Traversal::Columns => {
            let [a0, a1, a2, a3] = form.coeffs;
            (region.transposed(), BinaryCubicForm { coeffs: [a3, a2, a1, a0] })
        }
    };
    let b = scan_region.x_bound(xi);
    if (2 * b as u64 + 1).saturating_mul(2 * scan_region.y_bound(xi) as u64 + 1) > POINT_BUDGET {
        return Err(Error::Budget(format!("region at xi = {xi} exceeds the point budget")));
    }
    // row bands in parallel; integer partial sums merge deterministically
    let rows: Result<Vec<u64>> = (-b..=b)
        .into_par_iter()
        .map(|m| -> Result<u64> {
            let Some(h) = scan_region.row_half_width(m, xi) else { return Ok(0) };
            let mut row_sum = 0u64;
            for n in -h..=h {
                if m == 0 && n == 0 {
                    continue;
                }
                let v = scan_form.eval(m, n);
                if v == 0 {
                    return Err(Error::ZeroValueEncountered(m, n));
                }
                let v = u64::try_from(v.unsigned_abs())
                    .map_err(|_| Error::Overflow("form value beyond 2^64"))?;
                row_sum += r3_of_factorization(chi, &factor(v)?);
            }
            Ok(row_sum)
        })
        .collect();
    Ok(rows?.into_iter().sum())
}

/// K(F)·L(1,χ)L(1,χ²)·vol(R)·ξ².
pub fn main_term(k_total: f64, l_product: f64, region: &RegionSpec, xi: Ratio<i64>) -> f64 {
    let x = ratio_to_f64(xi);
    k_total * l_product * region.vol() * x * x
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusRow {
    pub xi: String,
    pub lattice_points: u64,
    pub q_empirical: u64,
    pub main_term: f64,
    pub ratio: f64,
    /// |ratio(this)/ratio(prev) − 1| when this ξ doubles the previous one
    pub ratio_stability: Option<f64>,
    pub seconds: f64,
    /// 1/√ξ ≤ σ, ϑ ≤ ξ^{3/2} window of the asymptotic statement
    pub window_condition_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusConstants {
    pub k_total: f64,
    pub l_product: f64,
    pub vol: f64,
    pub sigma: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusReport {
    pub schema: u32,
    pub conductor_q: u64,
    pub form: [i64; 4],
    pub region: String,
    /// r₃ is evaluated at |F(x)|; the origin is excluded from every scan
    pub abs_value_convention: bool,
    pub constants: CensusConstants,
    /// histogram over ξ rows of log2(max |F| on R(ξ)) in 8-bit buckets,
    /// a cheap factorization-workload regression tracker
    pub value_magnitude_hist: Vec<u64>,
    pub rows: Vec<CensusRow>,
}

/// Full census run over ascending ξ values.
pub fn convergence_run(
    form: &BinaryCubicForm,
    chi: &CubicCharacter,
    field: &CubicField,
    region: &RegionSpec,
    xi_list: &[Ratio<i64>],
    density: &DensityReport,
    l_product: &LValueProduct,
) -> Result<CensusReport> {
    if xi_list.is_empty() || xi_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("xi list must be strictly ascending".into()));
    }
    h4_check(form, field, chi)?;
    let sigma = region.sigma();
    let theta = region.theta(form);
    let mut rows = Vec::new();
    let mut hist = vec![0u64; 9];
    let mut prev: Option<(Ratio<i64>, f64)> = None;
    for &xi in xi_list {
        check_xi(xi)?;
        let started = Instant::now();
        let q_emp = q_empirical(form, chi, region, xi, Traversal::Rows)?;
        let seconds = started.elapsed().as_secs_f64();
        let points = region.lattice_point_count(xi);
        let mt = main_term(density.k_total, l_product.value, region, xi);
        let ratio = q_emp as f64 / mt;
        let xif = ratio_to_f64(xi);
        let ratio_stability = prev.and_then(|(pxi, pratio)| {
            (xi == pxi * Ratio::new(2, 1)).then(|| (ratio / pratio - 1.0).abs())
        });
        let window_condition_ok = sigma >= xif.powf(-0.5)
            && sigma <= xif.powf(1.5)
            && theta >= xif.powf(-0.5)
            && theta <= xif.powf(1.5);
        let bucket = (lattice_sup_abs_form(form, region, xi) as f64).log2() as usize / 8;
        hist[bucket.min(8)] += 1;
        rows.push(CensusRow {
            xi: xi.to_string(),
            lattice_points: points,
            q_empirical: q_emp,
            main_term: mt,
            ratio,
            ratio_stability,
            seconds,
            window_condition_ok,
        });
        prev = Some((xi, ratio));
    }
    Ok(CensusReport {
        schema: 1,
        conductor_q: field.conductor_q,
        form: form.coeffs,
        region: region.describe(),
        abs_value_convention: true,
        constants: CensusConstants {
            k_total: density.k_total,
            l_product: l_product.value,
            vol: region.vol(),
            sigma,
            theta,
        },
        value_magnitude_hist: hist,
        rows,
    })
}

/// RFC 4180 CSV of the per-ξ rows.
pub fn census_csv(report: &CensusReport) -> String {
    let mut out = String::from("xi,points,Q,main_term,ratio,seconds\r\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\r\n",
            r.xi, r.lattice_points, r.q_empirical, r.main_term, r.ratio, r.seconds
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BuiltinField;

    fn setup() -> (CubicField, CubicCharacter, BinaryCubicForm) {
        let field = CubicField::builtin(BuiltinField::Q7);
        let chi = CubicCharacter::for_field(&field).unwrap();
        let form = BinaryCubicForm::new([1, 0, 0, 2]).unwrap();
        (field, chi, form)
    }

    #[test]
    fn parse_regions_and_ratios() {
        assert_eq!(parse_ratio("1.0").unwrap(), Ratio::new(1, 1));
        assert_eq!(parse_ratio("0.75").unwrap(), Ratio::new(3, 4));
        assert_eq!(parse_ratio("12").unwrap(), Ratio::new(12, 1));
        assert_eq!(parse_ratio("-2.5").unwrap(), Ratio::new(-5, 2));
        assert!(RegionSpec::parse("disc:1.0").is_ok());
        assert!(RegionSpec::parse("ellipse:1.5,0.75").is_ok());
        assert!(RegionSpec::parse("square:1").is_err());
        assert!(RegionSpec::parse("disc:0").is_err());
    }

    #[test]
    fn gauss_circle_points() {
        let region = RegionSpec::unit_disc();
        assert_eq!(region.lattice_point_count(Ratio::new(10, 1)), 317);
        assert_eq!(region.lattice_point_count(Ratio::new(20, 1)), 1257);
    }

    #[test]
    fn tiny_region_empty_census() {
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        // ξ so small that only the origin is inside — census is 0
        let q = q_empirical(&form, &chi, &region, Ratio::new(1, 10), Traversal::Rows).unwrap();
        assert_eq!(q, 0);
    }

    #[test]
    fn traversal_orders_agree() {
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        for xi in [7i64, 15, 23] {
            let a = q_empirical(&form, &chi, &region, Ratio::new(xi, 1), Traversal::Rows).unwrap();
            let b =
                q_empirical(&form, &chi, &region, Ratio::new(xi, 1), Traversal::Columns).unwrap();
            assert_eq!(a, b, "xi = {xi}");
        }
        let ell = RegionSpec::parse("ellipse:1.5,0.75").unwrap();
        let a = q_empirical(&form, &chi, &ell, Ratio::new(11, 1), Traversal::Rows).unwrap();
        let b = q_empirical(&form, &chi, &ell, Ratio::new(11, 1), Traversal::Columns).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn census_monotone_in_xi() {
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        let mut prev = 0u64;
        for xi in [5i64, 10, 15, 20] {
            let q = q_empirical(&form, &chi, &region, Ratio::new(xi, 1), Traversal::Rows).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn sign_invariance() {
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        let xi = Ratio::new(13, 1);
        let a = q_empirical(&form, &chi, &region, xi, Traversal::Rows).unwrap();
        let b = q_empirical(&form.neg(), &chi, &region, xi, Traversal::Rows).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brute_census_oracle_small_xi() {
        // direct double loop with closed-disc membership in integers
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        for xi in [6i64, 11] {
            let mut expect = 0u64;
            for m in -xi..=xi {
                for n in -xi..=xi {
                    if m == 0 && n == 0 {
                        continue;
                    }
                    if m * m + n * n <= xi * xi {
                        let v = form.eval(m, n).unsigned_abs() as u64;
                        expect += crate::arith::r3(&chi, v).unwrap();
                    }
                }
            }
            let got =
                q_empirical(&form, &chi, &region, Ratio::new(xi, 1), Traversal::Rows).unwrap();
            assert_eq!(got, expect, "xi = {xi}");
        }
    }

    #[test]
    fn census_against_convolution_oracle_xi_20() {
        // every point value checked through the triple divisor sum
        let (_, chi, form) = setup();
        let region = RegionSpec::unit_disc();
        let xi = 20i64;
        let mut expect = 0u64;
        let mut points = 0u64;
        for m in -xi..=xi {
            for n in -xi..=xi {
                if m * m + n * n > xi * xi {
                    continue;
                }
                points += 1;
                if m == 0 && n == 0 {
                    continue;
                }
                let v = form.eval(m, n).unsigned_abs() as u64;
                expect += crate::arith::r3_brute(&chi, v).unwrap();
            }
        }
        assert_eq!(points, 1257);
        let got = q_empirical(&form, &chi, &region, Ratio::new(xi, 1), Traversal::Rows).unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn main_term_scalings() {
        let region = RegionSpec::unit_disc();
        let m1 = main_term(0.5, 0.3, &region, Ratio::new(10, 1));
        let m2 = main_term(0.5, 0.3, &region, Ratio::new(20, 1));
        assert!((m2 / m1 - 4.0).abs() < 1e-12, "ξ² scaling");
        let bigger = RegionSpec::disc(Ratio::new(2, 1)).unwrap();
        let m3 = main_term(0.5, 0.3, &bigger, Ratio::new(10, 1));
        assert!((m3 / m1 - 4.0).abs() < 1e-12, "vol scaling");
        assert!(m1 > 0.0);
    }

    #[test]
    fn vol_dilation_identity_exact() {
        // (r·ξ)² = ξ²·r² as exact rationals
        for (r, xi) in [(Ratio::new(3, 2), Ratio::new(7, 3)), (Ratio::new(1, 1), Ratio::new(10, 1))] {
            let lhs = (r * xi) * (r * xi);
            let rhs = xi * xi * r * r;
            assert_eq!(lhs, rhs);
        }
    }

    proptest::proptest! {
        #[test]
        fn row_half_width_is_exact_boundary(m in -60i64..60, num in 1i64..40, den in 1i64..8) {
            let region = RegionSpec::disc(Ratio::new(3, 2)).unwrap();
            let xi = Ratio::new(num, den);
            if let Some(h) = region.row_half_width(m, xi) {
                proptest::prop_assert!(region.contains(m, h, xi));
                proptest::prop_assert!(!region.contains(m, h + 1, xi));
            } else {
                proptest::prop_assert!(!region.contains(m, 0, xi));
            }
        }

        #[test]
        fn ratio_parse_roundtrip(whole in 0i64..100_000, frac in 0u32..1000) {
            let s = format!("{whole}.{frac:03}");
            let r = parse_ratio(&s).unwrap();
            proptest::prop_assert_eq!(r, Ratio::new(whole * 1000 + frac as i64, 1000));
        }
    }

    #[test]
    fn zero_value_detected() {
        // reducible form with a lattice zero: the scanner must hard-fail
        let chi = {
            let f = CubicField::builtin(BuiltinField::Q7);
            CubicCharacter::for_field(&f).unwrap()
        };
        let form = BinaryCubicForm::new([1, 0, -1, 0]).unwrap(); // X(X−Y)(X+Y)
        let region = RegionSpec::unit_disc();
        let res = q_empirical(&form, &chi, &region, Ratio::new(3, 1), Traversal::Rows);
        assert!(matches!(res, Err(Error::ZeroValueEncountered(_, _))));
    }
}
