//! Radial Fourier multipliers: the I-operator profile, `⟨D⟩^σ`, the
//! Littlewood–Paley cutoffs, the low/high split and the Bony paraproduct
//! decomposition.
//!
//! Every transition region uses the same C^∞ blend
//! `θ(r) = B(r-1) / (B(r-1) + B(2-r))`, `B(t) = exp(-1/t)` for `t > 0`,
//! which is 0 for `r ≤ 1` and 1 for `r ≥ 2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    dealiased_product, inverse_transform, lp_norm, same_grid, Mode, SpectralField, TorusGrid,
};

/// Default factor of the low/high split: `P_{≲N} = P_{≤128N}`.
pub const DEFAULT_SPLIT_FACTOR: f64 = 128.0;

/// Regularity `s` and frequency threshold `N` of the I-operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IMethodParams {
    s: f64,
    cutoff: f64,
    split_factor: f64,
    blend: f64,
}

impl IMethodParams {
    pub fn new(s: f64, cutoff: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("regularity s must lie in (0,1), got {s}")));
        }
        if !(cutoff >= 1.0) || !cutoff.is_finite() {
            return Err(Error::domain(format!("threshold N must be >= 1, got {cutoff}")));
        }
        Ok(IMethodParams {
            s,
            cutoff,
            split_factor: DEFAULT_SPLIT_FACTOR,
            blend: 1.0,
        })
    }

    /// Replaces the factor `128` of the low/high split. Desk-scale grids never
    /// reach `128N`, so experiments on the high-frequency part lower it.
    pub fn with_split_factor(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::domain(format!("split factor must be positive, got {factor}")));
        }
        self.split_factor = factor;
        Ok(self)
    }

    /// Test hook: rescales the blend as `B(t) = exp(-c/t)`.
    pub fn with_blend(mut self, steepness: f64) -> Self {
        self.blend = steepness;
        self
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The threshold `N`.
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn split_factor(&self) -> f64 {
        self.split_factor
    }

    pub fn blend(&self) -> f64 {
        self.blend
    }

    /// Radius separating `P_{≲N}` from `P_{≳N}`.
    pub fn split_radius(&self) -> f64 {
        self.split_factor * self.cutoff
    }
}

fn bump(t: f64, steepness: f64) -> f64 {
    if t > 0.0 {
        (-steepness / t).exp()
    } else {
        0.0
    }
}

fn transition_with(r: f64, steepness: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else if r >= 2.0 {
        1.0
    } else {
        let a = bump(r - 1.0, steepness);
        let b = bump(2.0 - r, steepness);
        a / (a + b)
    }
}

/// The blend `θ`: 0 on `[0,1]`, 1 on `[2,∞)`, smooth and increasing between.
pub fn transition(r: f64) -> f64 {
    transition_with(r, 1.0)
}

pub(crate) fn eta_with(r: f64, s: f64, steepness: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        r.powf(s - 1.0)
    } else {
        r.powf((s - 1.0) * transition_with(r, steepness))
    }
}

/// Profile of the I-operator before rescaling by `N`.
pub fn eta_profile(r: f64, s: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::domain(format!("radius must be >= 0, got {r}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("regularity s must lie in (0,1), got {s}")));
    }
    Ok(eta_with(r, s, 1.0))
}

/// `m(r) = η(r / N)`.
pub fn m_radial(r: f64, params: &IMethodParams) -> f64 {
    eta_with(r / params.cutoff, params.s, params.blend)
}

pub fn m_symbol(mode: Mode, params: &IMethodParams) -> f64 {
    m_radial(mode.norm(), params)
}

/// Smooth cutoff: 1 on the unit ball, 0 outside radius 2.
pub fn phi(r: f64) -> f64 {
    1.0 - transition(r)
}

/// Dyadic shell profile `φ(r) - φ(2r)`, supported on `[1/2, 2]`.
pub fn psi(r: f64) -> f64 {
    phi(r) - phi(2.0 * r)
}

/// 1 on radius ≤ 2, 0 beyond 4.
pub fn phi_tilde(r: f64) -> f64 {
    phi(r / 2.0)
}

/// 1 on `[1/2, 2]`, supported on `[1/4, 4]`.
pub fn psi_tilde(r: f64) -> f64 {
    phi(r / 2.0) - phi(4.0 * r)
}

/// `⟨r⟩ = (1 + r²)^{1/2}`.
pub fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// A Littlewood–Paley scale: `0` or a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyadic(u64);

impl Dyadic {
    pub fn new(m: u64) -> Result<Self> {
        if m == 0 || m.is_power_of_two() {
            Ok(Dyadic(m))
        } else {
            Err(Error::domain(format!("{m} is neither 0 nor a power of two")))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

/// Scales `0, 2, 4, …, M_top` with `M_top ≥` the largest mode radius.
/// Since `P₀` is `φ` itself, the shells telescope from `M = 2`:
/// `φ(ξ) + Σ_{2 ≤ M ≤ M_top} ψ(ξ/M) = φ(ξ/M_top)`, which is 1 on the grid.
pub fn dyadic_levels(grid: TorusGrid) -> Vec<u64> {
    let mut levels = vec![0];
    let mut m = 1u64;
    while (m as f64) < grid.max_radius() {
        m *= 2;
        levels.push(m);
    }
    levels
}

/// Radial Fourier symbol, evaluated at integer modes only.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Identity,
    Eta { s: f64 },
    /// The I-operator symbol `m`.
    M(IMethodParams),
    /// `⟨D⟩^σ`.
    JapPower { sigma: f64 },
    /// `D` with the torus dispersion relation, `2π|k|`.
    AngularD,
    /// `φ(·/M)`; `P_{≤M}`.
    LpPhi { m: Dyadic },
    /// `ψ(·/M)`, or `φ` when `M = 0`; `P_M`.
    LpPsi { m: Dyadic },
    LpPhiTilde { m: Dyadic },
    LpPsiTilde { m: Dyadic },
    /// `φ(·/R)` for an arbitrary radius `R > 0`.
    LowPass { radius: f64 },
    /// `1 - σ`.
    Complement(Box<Symbol>),
    /// `1 / σ`.
    Reciprocal(Box<Symbol>),
    Product(Vec<Symbol>),
}

fn scaled(m: Dyadic, r: f64) -> f64 {
    if m.0 == 0 {
        r
    } else {
        r / m.0 as f64
    }
}

impl Symbol {
    pub fn profile(&self, r: f64) -> f64 {
        match self {
            Symbol::Identity => 1.0,
            Symbol::Eta { s } => eta_with(r, *s, 1.0),
            Symbol::M(params) => m_radial(r, params),
            Symbol::JapPower { sigma } => japanese(r).powf(*sigma),
            Symbol::AngularD => 2.0 * PI * r,
            Symbol::LpPhi { m } => phi(scaled(*m, r)),
            Symbol::LpPsi { m } if m.0 == 0 => phi(r),
            Symbol::LpPsi { m } => psi(scaled(*m, r)),
            Symbol::LpPhiTilde { m } => phi_tilde(scaled(*m, r)),
            Symbol::LpPsiTilde { m } => psi_tilde(scaled(*m, r)),
            Symbol::LowPass { radius } => phi(r / radius),
            Symbol::Complement(inner) => 1.0 - inner.profile(r),
            Symbol::Reciprocal(inner) => 1.0 / inner.profile(r),
            Symbol::Product(parts) => parts.iter().map(|p| p.profile(r)).product(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Symbol::Identity => "identity".into(),
            Symbol::Eta { .. } => "eta".into(),
            Symbol::M(_) => "m".into(),
            Symbol::JapPower { sigma } => format!("jap_power({sigma})"),
            Symbol::AngularD => "angular_D".into(),
            Symbol::LpPhi { m } => format!("lp_phi({})", m.0),
            Symbol::LpPsi { m } => format!("lp_psi({})", m.0),
            Symbol::LpPhiTilde { m } => format!("lp_phi_tilde({})", m.0),
            Symbol::LpPsiTilde { m } => format!("lp_psi_tilde({})", m.0),
            Symbol::LowPass { radius } => format!("low_pass({radius})"),
            Symbol::Complement(inner) => format!("1-{}", inner.name()),
            Symbol::Reciprocal(inner) => format!("1/{}", inner.name()),
            Symbol::Product(parts) => parts
                .iter()
                .map(Symbol::name)
                .collect::<Vec<_>>()
                .join("*"),
        }
    }

    pub fn times(self, other: Symbol) -> Symbol {
        match self {
            Symbol::Product(mut parts) => {
                parts.push(other);
                Symbol::Product(parts)
            }
            first => Symbol::Product(vec![first, other]),
        }
    }

    /// `P_{≳N}`: the complement of the cutoff at the split radius.
    pub fn high_part(params: &IMethodParams) -> Symbol {
        Symbol::Complement(Box::new(Symbol::LowPass {
            radius: params.split_radius(),
        }))
    }

    /// Values at every mode of `grid`, in storage order.
    pub fn tabulate(&self, grid: TorusGrid) -> Vec<f64> {
        grid.radii().into_iter().map(|r| self.profile(r)).collect()
    }

    /// Parses a structured text block such as `name = "m"`, `s = 0.5`, `N = 16`.
    pub fn from_config_str(text: &str) -> Result<Symbol> {
        let config: SymbolConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("symbol block: {e}")))?;
        config.build()
    }
}

/// Text form of the named symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    Eta {
        s: f64,
    },
    M {
        s: f64,
        #[serde(rename = "N")]
        n: f64,
    },
    JapPower {
        sigma: f64,
    },
    #[serde(rename = "angular_D")]
    AngularD,
    LpPhi {
        #[serde(rename = "M")]
        m: u64,
    },
    LpPsi {
        #[serde(rename = "M")]
        m: u64,
    },
    LpPhiTilde {
        #[serde(rename = "M")]
        m: u64,
    },
    LpPsiTilde {
        #[serde(rename = "M")]
        m: u64,
    },
}

impl SymbolConfig {
    pub fn build(&self) -> Result<Symbol> {
        Ok(match *self {
            SymbolConfig::Eta { s } => {
                eta_profile(0.0, s)?;
                Symbol::Eta { s }
            }
            SymbolConfig::M { s, n } => Symbol::M(IMethodParams::new(s, n)?),
            SymbolConfig::JapPower { sigma } => Symbol::JapPower { sigma },
            SymbolConfig::AngularD => Symbol::AngularD,
            SymbolConfig::LpPhi { m } => Symbol::LpPhi { m: Dyadic::new(m)? },
            SymbolConfig::LpPsi { m } => Symbol::LpPsi { m: Dyadic::new(m)? },
            SymbolConfig::LpPhiTilde { m } => Symbol::LpPhiTilde { m: Dyadic::new(m)? },
            SymbolConfig::LpPsiTilde { m } => Symbol::LpPsiTilde { m: Dyadic::new(m)? },
        })
    }
}

pub fn apply_symbol(field: &SpectralField, symbol: &Symbol) -> SpectralField {
    field.map_radial(|r| symbol.profile(r))
}

/// Multiplies by a table from [`Symbol::tabulate`] on the same grid.
pub fn apply_table(field: &SpectralField, table: &[f64]) -> SpectralField {
    debug_assert_eq!(field.coeffs().len(), table.len());
    let coeffs = field.coeffs().iter().zip(table).map(|(c, t)| c * t).collect();
    SpectralField::from_coeffs(field.grid(), coeffs, field.is_real()).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpKind {
    /// `P_M`.
    At,
    /// `P_{≤M}`.
    Leq,
    /// `P_{>M}`.
    Gt,
}

pub fn lp_project(field: &SpectralField, m: u64, kind: LpKind) -> Result<SpectralField> {
    let m = Dyadic::new(m)?;
    Ok(match kind {
        LpKind::At => apply_symbol(field, &Symbol::LpPsi { m }),
        LpKind::Leq => apply_symbol(field, &Symbol::LpPhi { m }),
        LpKind::Gt => apply_symbol(
            field,
            &Symbol::Complement(Box::new(Symbol::LpPhi { m })),
        ),
    })
}

/// `(P_{≲N} F, P_{≳N} F)`; the two parts sum to `F`.
pub fn low_high_split(
    field: &SpectralField,
    params: &IMethodParams,
) -> (SpectralField, SpectralField) {
    let low = apply_symbol(
        field,
        &Symbol::LowPass {
            radius: params.split_radius(),
        },
    );
    let high = field.sub(&low).expect("same grid");
    (low, high)
}

/// Frequency thresholds of the paraproduct split: factors with scale `≤ low`
/// count as low, and two high scales are comparable when their ratio lies in
/// `[1/ratio, ratio]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BonyCutoffs {
    pub low: u64,
    pub ratio: u64,
}

impl Default for BonyCutoffs {
    fn default() -> Self {
        BonyCutoffs { low: 16, ratio: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonyPieces {
    /// Both factors low.
    pub w: SpectralField,
    /// High `f` against low `g`.
    pub x1: SpectralField,
    /// Low `f` against high `g`.
    pub x2: SpectralField,
    /// High `f` against a much lower (but not low) `g`.
    pub y1: SpectralField,
    pub y2: SpectralField,
    /// Comparable high scales.
    pub z: SpectralField,
}

impl BonyPieces {
    pub fn labeled(&self) -> [(&'static str, &SpectralField); 6] {
        [
            ("W", &self.w),
            ("X1", &self.x1),
            ("X2", &self.x2),
            ("Y1", &self.y1),
            ("Y2", &self.y2),
            ("Z", &self.z),
        ]
    }

    pub fn total(&self) -> SpectralField {
        let mut total = self.w.clone();
        for (_, piece) in &self.labeled()[1..] {
            total.add_assign(piece);
        }
        total
    }
}

fn sum_pieces<'a>(pieces: impl Iterator<Item = &'a SpectralField>) -> Option<SpectralField> {
    let mut acc: Option<SpectralField> = None;
    for p in pieces {
        match acc.as_mut() {
            Some(a) => a.add_assign(p),
            None => acc = Some(p.clone()),
        }
    }
    acc
}

fn product_or_zero(
    grid: TorusGrid,
    f: Option<&SpectralField>,
    g: Option<&SpectralField>,
) -> Result<SpectralField> {
    match (f, g) {
        (Some(f), Some(g)) if f.max_abs() > 0.0 && g.max_abs() > 0.0 => dealiased_product(f, g),
        _ => Ok(SpectralField::zeros(grid)),
    }
}

pub fn bony_decompose(f: &SpectralField, g: &SpectralField) -> Result<BonyPieces> {
    bony_decompose_with(f, g, BonyCutoffs::default())
}

/// Splits the dealiased product `f g` over pairs of Littlewood–Paley scales
/// `(A, B)`; every pair lands in exactly one piece, so the six pieces sum to
/// the product.
pub fn bony_decompose_with(
    f: &SpectralField,
    g: &SpectralField,
    cutoffs: BonyCutoffs,
) -> Result<BonyPieces> {
    same_grid(f.grid(), g.grid())?;
    let grid = f.grid();
    let levels = dyadic_levels(grid);
    let project = |field: &SpectralField| -> Vec<SpectralField> {
        levels
            .iter()
            .map(|&m| lp_project(field, m, LpKind::At).expect("dyadic level"))
            .collect()
    };
    let fp = project(f);
    let gp = project(g);
    let is_low = |m: u64| m <= cutoffs.low;
    let r = cutoffs.ratio;

    let select = |pieces: &[SpectralField], pred: &dyn Fn(u64) -> bool| {
        sum_pieces(
            levels
                .iter()
                .zip(pieces.iter())
                .filter(|(m, _)| pred(**m))
                .map(|(_, p)| p),
        )
    };

    let f_low = select(&fp, &|m| is_low(m));
    let f_high = select(&fp, &|m| !is_low(m));
    let g_low = select(&gp, &|m| is_low(m));
    let g_high = select(&gp, &|m| !is_low(m));

    let w = product_or_zero(grid, f_low.as_ref(), g_low.as_ref())?;
    let x1 = product_or_zero(grid, f_high.as_ref(), g_low.as_ref())?;
    let x2 = product_or_zero(grid, f_low.as_ref(), g_high.as_ref())?;

    let mut y1 = SpectralField::zeros(grid);
    let mut y2 = SpectralField::zeros(grid);
    let mut z = SpectralField::zeros(grid);
    for (i, &a) in levels.iter().enumerate() {
        if is_low(a) {
            continue;
        }
        let g_much_lower = select(&gp, &|b| !is_low(b) && b * r < a);
        y1.add_assign(&product_or_zero(grid, Some(&fp[i]), g_much_lower.as_ref())?);
        let f_much_lower = select(&fp, &|b| !is_low(b) && b * r < a);
        y2.add_assign(&product_or_zero(grid, f_much_lower.as_ref(), Some(&gp[i]))?);
        let g_comparable = select(&gp, &|b| !is_low(b) && b * r >= a && a * r >= b);
        z.add_assign(&product_or_zero(grid, Some(&fp[i]), g_comparable.as_ref())?);
    }
    Ok(BonyPieces { w, x1, x2, y1, y2, z })
}

/// `‖P_{≤M}F‖_{L^q} / (⟨M⟩^{2(1/p-1/q)} ‖P_{≤M}F‖_{L^p})`, or 0 when the
/// denominator vanishes.
pub fn bernstein_ratio(field: &SpectralField, m: u64, p: f64, q: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::domain(format!("p must be >= 1, got {p}")));
    }
    if q.is_nan() || q < p {
        return Err(Error::domain(format!("q must be >= p, got p = {p}, q = {q}")));
    }
    let projected = inverse_transform(&lp_project(field, m, LpKind::Leq)?)?;
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    let weight = japanese(m as f64).powf(2.0 * (inv(p) - inv(q)));
    let den = weight * lp_norm(&projected, p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(lp_norm(&projected, q)? / den)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_real(grid: TorusGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for mode in grid.modes() {
            if !grid.is_nyquist(mode) {
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                modes.push((mode, c));
            }
        }
        // Later entries overwrite the conjugate partners of earlier ones.
        let field = SpectralField::from_real_modes(grid, &modes).unwrap();
        field.check_hermitian().unwrap();
        field
    }

    fn single_mode(grid: TorusGrid, k1: i64, k2: i64) -> SpectralField {
        SpectralField::from_real_modes(grid, &[(Mode { k1, k2 }, Complex64::new(1.0, 0.0))])
            .unwrap()
    }

    #[test]
    fn eta_profile_values() {
        assert_eq!(eta_profile(0.5, 0.3).unwrap(), 1.0);
        assert_eq!(eta_profile(1.0, 0.3).unwrap(), 1.0);
        assert!((eta_profile(4.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let mid = eta_profile(1.5, 0.5).unwrap();
        assert!(mid > 1.5f64.powf(-0.5) && mid < 1.0);
        assert!(eta_profile(-1.0, 0.5).is_err());
        assert!(eta_profile(1.0, 1.0).is_err());
    }

    #[test]
    fn eta_is_monotone_and_bounded() {
        for s in [0.3, 0.45, 0.5, 0.9] {
            let mut prev = 1.0;
            for i in 0..4000 {
                let r = i as f64 * 1e-3;
                let v = eta_profile(r, s).unwrap();
                assert!(v > 0.0 && v <= 1.0);
                assert!(v <= prev + 1e-15, "increase at r = {r}");
                prev = v;
            }
        }
    }

    #[test]
    fn m_symbol_examples() {
        let params = IMethodParams::new(0.5, 16.0).unwrap();
        assert_eq!(m_symbol(Mode { k1: 8, k2: 0 }, &params), 1.0);
        assert_eq!(m_symbol(Mode { k1: 16, k2: 0 }, &params), 1.0);
        assert_eq!(m_symbol(Mode { k1: 11, k2: 11 }, &params), 1.0);
        assert!((m_symbol(Mode { k1: 64, k2: 0 }, &params) - 0.5).abs() < 1e-15);
        // m(n) <n>^{1-s} / N^{1-s} stays between fixed constants on the tail.
        for s in [0.3, 0.5, 0.8] {
            let params = IMethodParams::new(s, 8.0).unwrap();
            for k1 in 16..200 {
                for k2 in [0, 7, 31] {
                    let mode = Mode { k1, k2 };
                    let r = japanese(mode.norm());
                    let scaled = m_symbol(mode, &params) * r.powf(1.0 - s) / 8f64.powf(1.0 - s);
                    assert!(scaled >= 1.0 && scaled <= 1.01, "{scaled}");
                }
            }
        }
    }

    #[test]
    fn cutoff_supports() {
        assert_eq!(phi(1.0), 1.0);
        assert_eq!(phi(2.0), 0.0);
        assert_eq!(psi(3.0), 0.0);
        assert_eq!(psi(0.5), 0.0);
        assert_eq!(psi(1.0), 1.0);
        assert!(psi(0.75) > 0.0 && psi(1.5) > 0.0);
        assert_eq!(psi_tilde(0.5), 1.0);
        assert_eq!(psi_tilde(2.0), 1.0);
        assert_eq!(psi_tilde(4.0), 0.0);
        assert_eq!(phi_tilde(2.0), 1.0);
        for i in 0..1000 {
            let r = i as f64 * 5e-3;
            let t = transition(r);
            assert!((0.0..=1.0).contains(&t));
            assert!((psi(r) + phi(2.0 * r) - phi(r)).abs() < 1e-15);
        }
    }

    #[test]
    fn symbol_application() {
        let grid = TorusGrid::new(16).unwrap();
        let f = random_real(grid, 1);
        assert_eq!(apply_symbol(&f, &Symbol::Identity), f);

        let m = Symbol::M(IMethodParams::new(0.4, 2.0).unwrap());
        let back = apply_symbol(&apply_symbol(&f, &m), &Symbol::Reciprocal(Box::new(m)));
        assert!(back.max_abs_diff(&f) < 1e-12);

        let e = single_mode(grid, 3, 4);
        for sigma in [-1.0, 0.5, 2.0] {
            let out = apply_symbol(&e, &Symbol::JapPower { sigma });
            let expected = 26f64.powf(sigma / 2.0);
            assert!((out.coeff(Mode { k1: 3, k2: 4 }).re - expected).abs() < 1e-12 * expected);
            assert!((out.coeff(Mode { k1: -3, k2: -4 }).re - expected).abs() < 1e-12 * expected);
        }
        apply_symbol(&f, &Symbol::JapPower { sigma: 0.7 })
            .check_hermitian()
            .unwrap();
    }

    #[test]
    fn partition_of_unity() {
        for n in [4, 16, 64] {
            let grid = TorusGrid::new(n).unwrap();
            let f = random_real(grid, n as u64);
            let mut total = SpectralField::zeros(grid);
            for m in dyadic_levels(grid) {
                total.add_assign(&lp_project(&f, m, LpKind::At).unwrap());
            }
            assert!(total.max_abs_diff(&f) < 1e-14, "n = {n}");
            for m in [0, 1, 4, 16] {
                let low = lp_project(&f, m, LpKind::Leq).unwrap();
                let high = lp_project(&f, m, LpKind::Gt).unwrap();
                assert!(low.add(&high).unwrap().max_abs_diff(&f) < 1e-14);
            }
        }
    }

    #[test]
    fn projection_kills_modes_outside_shell() {
        let grid = TorusGrid::new(64).unwrap();
        for m in [2u64, 4, 8] {
            let e = single_mode(grid, 3 * m as i64, 0);
            assert_eq!(lp_project(&e, m, LpKind::At).unwrap().max_abs(), 0.0);
        }
        let f = random_real(grid, 5);
        assert!(lp_project(&f, 3, LpKind::At).is_err());
        assert!(lp_project(&f, 6, LpKind::Leq).is_err());
    }

    #[test]
    fn i_commutes_with_projections() {
        let grid = TorusGrid::new(32).unwrap();
        let f = random_real(grid, 9);
        let m = Symbol::M(IMethodParams::new(0.5, 3.0).unwrap());
        for level in dyadic_levels(grid) {
            for kind in [LpKind::At, LpKind::Leq, LpKind::Gt] {
                let a = apply_symbol(&lp_project(&f, level, kind).unwrap(), &m);
                let b = lp_project(&apply_symbol(&f, &m), level, kind).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-14);
            }
        }
    }

    #[test]
    fn low_high_split_cases() {
        let grid = TorusGrid::new(32).unwrap();
        let params = IMethodParams::new(0.5, 2.0).unwrap();
        let band = SpectralField::from_fn(grid, true, |k| {
            if k.norm() <= 2.0 {
                Complex64::new(1.0 / (1.0 + k.norm_sq() as f64), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let (low, high) = low_high_split(&band, &params);
        assert_eq!(high.max_abs(), 0.0);
        assert_eq!(low, band);

        let params = params.with_split_factor(2.0).unwrap();
        let f = random_real(grid, 3);
        let (low, high) = low_high_split(&f, &params);
        assert!(low.add(&high).unwrap().max_abs_diff(&f) < 1e-14);
        // Mode beyond twice the split radius lies outside the cutoff support.
        let far = single_mode(grid, 12, 12);
        let (low, high) = low_high_split(&far, &params);
        assert_eq!(low.max_abs(), 0.0);
        assert_eq!(high, far);
    }

    fn nonzero_pieces(pieces: &BonyPieces) -> Vec<&'static str> {
        pieces
            .labeled()
            .iter()
            .filter(|(_, p)| p.max_abs() > 1e-14)
            .map(|(name, _)| *name)
            .collect()
    }

    #[test]
    fn bony_low_modes_only_in_w() {
        let grid = TorusGrid::new(16).unwrap();
        let f = single_mode(grid, 1, 0);
        let g = single_mode(grid, 0, 1).add(&single_mode(grid, 0, 0)).unwrap();
        let pieces = bony_decompose(&f, &g).unwrap();
        assert_eq!(nonzero_pieces(&pieces), vec!["W"]);
    }

    #[test]
    fn bony_reconstructs_product() {
        let grid = TorusGrid::new(16).unwrap();
        let f = random_real(grid, 11);
        let g = random_real(grid, 12);
        let product = dealiased_product(&f, &g).unwrap();
        let pieces = bony_decompose(&f, &g).unwrap();
        assert!(pieces.total().max_abs_diff(&product) < 1e-10);

        // Small thresholds exercise every piece on a 128 grid.
        let grid = TorusGrid::new(128).unwrap();
        let f = random_real(grid, 13);
        let g = random_real(grid, 14);
        let product = dealiased_product(&f, &g).unwrap();
        let cutoffs = BonyCutoffs { low: 1, ratio: 4 };
        let pieces = bony_decompose_with(&f, &g, cutoffs).unwrap();
        assert_eq!(nonzero_pieces(&pieces).len(), 6);
        assert!(pieces.total().max_abs_diff(&product) < 1e-10);
    }

    #[test]
    fn bony_high_against_low_frequency() {
        let grid = TorusGrid::new(256).unwrap();
        let f = single_mode(grid, 64, 0);
        let g = single_mode(grid, 2, 0);
        // With the default thresholds, |n| = 2 is a low factor.
        let pieces = bony_decompose(&f, &g).unwrap();
        assert_eq!(nonzero_pieces(&pieces), vec!["X1"]);
        // With every positive scale counted as high it is the paraproduct piece.
        let cutoffs = BonyCutoffs { low: 0, ratio: 16 };
        let pieces = bony_decompose_with(&f, &g, cutoffs).unwrap();
        assert_eq!(nonzero_pieces(&pieces), vec!["Y1"]);
    }

    #[test]
    fn bony_rejects_grid_mismatch() {
        let f = SpectralField::zeros(TorusGrid::new(8).unwrap());
        let g = SpectralField::zeros(TorusGrid::new(16).unwrap());
        assert!(matches!(bony_decompose(&f, &g), Err(Error::GridMismatch(8, 16))));
    }

    #[test]
    fn bernstein_cases() {
        let grid = TorusGrid::new(32).unwrap();
        let c = SpectralField::from_real_modes(grid, &[(Mode::ZERO, Complex64::new(2.0, 0.0))])
            .unwrap();
        for (p, q) in [(1.0, 2.0), (2.0, f64::INFINITY), (2.0, 4.0)] {
            for m in [1u64, 4, 16] {
                let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
                let expected = japanese(m as f64).powf(-2.0 * (inv(p) - inv(q)));
                let got = bernstein_ratio(&c, m, p, q).unwrap();
                assert!((got - expected).abs() < 1e-12);
            }
        }
        let f = random_real(grid, 21);
        for m in [1u64, 2, 8] {
            assert!(bernstein_ratio(&f, m, 3.0, 3.0).unwrap() <= 1.0 + 1e-12);
        }
        let mut worst: f64 = 0.0;
        for seed in 0..8 {
            let f = random_real(grid, 100 + seed);
            for m in [1u64, 2, 4, 8, 16] {
                worst = worst.max(bernstein_ratio(&f, m, 2.0, f64::INFINITY).unwrap());
            }
        }
        assert!(worst.is_finite() && worst < 3.0, "{worst}");
        assert_eq!(bernstein_ratio(&SpectralField::zeros(grid), 4, 2.0, 4.0).unwrap(), 0.0);
        assert!(bernstein_ratio(&f, 4, 4.0, 2.0).is_err());
    }

    #[test]
    fn symbol_from_text() {
        let m = Symbol::from_config_str("name = \"m\"\ns = 0.5\nN = 16\n").unwrap();
        assert_eq!(m, Symbol::M(IMethodParams::new(0.5, 16.0).unwrap()));
        let j = Symbol::from_config_str("name = \"jap_power\"\nsigma = -0.5").unwrap();
        assert_eq!(j, Symbol::JapPower { sigma: -0.5 });
        let p = Symbol::from_config_str("name = \"lp_psi\"\nM = 8").unwrap();
        assert_eq!(p.name(), "lp_psi(8)");
        assert!(Symbol::from_config_str("name = \"lp_psi\"\nM = 6").is_err());
        assert!(Symbol::from_config_str("name = \"eta\"\ns = 0.5\nextra = 1").is_err());
        assert!(Symbol::from_config_str("name = \"angular_D\"").is_ok());
    }

    mod props {
        use proptest::prelude::*;

        use super::super::*;

        proptest! {
            #[test]
            fn m_in_unit_interval_and_nonincreasing(
                s in 0.01f64..0.99,
                cutoff in 1.0f64..64.0,
                r in 0.0f64..1000.0,
                dr in 0.0f64..10.0,
            ) {
                let params = IMethodParams::new(s, cutoff).unwrap();
                let a = m_radial(r, &params);
                let b = m_radial(r + dr, &params);
                prop_assert!(a > 0.0 && a <= 1.0);
                prop_assert!(b <= a + 1e-15);
                if r <= cutoff {
                    prop_assert_eq!(a, 1.0);
                }
            }

            #[test]
            fn shells_telescope(r in 0.0f64..2000.0) {
                let mut total = phi(r);
                let mut m = 2.0;
                while m < 4096.0 {
                    total += psi(r / m);
                    m *= 2.0;
                }
                prop_assert!((total - 1.0).abs() < 1e-14);
            }
        }
    }
}
