//! Adiabatic gauge potential: spectral (exact), nested-commutator ansatz,
//! the closed form for the two-qubit model, and the map between Floquet
//! drive coefficients β_k and ansatz coefficients α_k.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ising_model, two_qubit_model, IsingParams, TwoQubitParams};
use crate::operators::{
    commutator, eigendecompose, materialize, Eigensystem, OperatorMatrix, OperatorSum, PauliLabel,
    C64, I, ZERO,
};
use crate::schedules::PiecewiseBeta;

/// Relative gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Diagonal of `A` in the eigenbasis of `H` set to zero.
    ZeroDiagonal,
}

#[derive(Debug, Clone)]
pub struct AgpResult {
    pub matrix: OperatorMatrix,
    pub lambda: Option<f64>,
    pub gauge: Gauge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCoefficients {
    pub alphas: Vec<f64>,
}

impl AnsatzCoefficients {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("ansatz coefficients must be finite".into()));
        }
        Ok(Self { alphas })
    }

    pub fn cutoff(&self) -> usize {
        self.alphas.len()
    }
}

/// Spectral gauge potential `<m|A|n> = -i <m|dh|n> / (E_m - E_n)`.
pub fn exact_agp(h: &OperatorMatrix, dh: &OperatorMatrix) -> Result<AgpResult> {
    let eig = eigendecompose(h)?;
    exact_agp_with(&eig, dh)
}

/// As [`exact_agp`], reusing an existing eigendecomposition of `h`.
pub fn exact_agp_with(eig: &Eigensystem, dh: &OperatorMatrix) -> Result<AgpResult> {
    let dim = eig.dim();
    if dh.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: dh.dim(),
        });
    }
    let d = eig.to_eigenbasis(dh);
    let scale = eig.spectral_norm().max(f64::MIN_POSITIVE);
    let gap_tol = DEGENERACY_TOL * scale;
    let coupling_tol = DEGENERACY_TOL * dh.max_abs().max(1.0);
    let mut a = DMatrix::<C64>::zeros(dim, dim);
    for m in 0..dim {
        for n in 0..dim {
            if m == n {
                continue;
            }
            let gap = eig.energies[m] - eig.energies[n];
            if gap.abs() < gap_tol {
                if d[(m, n)].norm() > coupling_tol {
                    return Err(Error::DegenerateCoupling {
                        m,
                        n,
                        gap,
                        coupling: d[(m, n)].norm(),
                    });
                }
                continue;
            }
            a[(m, n)] = -I * d[(m, n)] / gap;
        }
    }
    Ok(AgpResult {
        matrix: eig.from_eigenbasis(&a),
        lambda: None,
        gauge: Gauge::ZeroDiagonal,
    })
}

/// `‖[i∂_λH - [A, H], H]‖_F`, zero for an exact gauge potential.
pub fn identity_residual(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    a: &OperatorMatrix,
) -> Result<f64> {
    let inner = &dh.scale_complex(I) - &commutator(a, h)?;
    Ok(commutator(&inner, h)?.frobenius_norm())
}

/// `X₁Y₂ + Y₁X₂`, the operator content of the two-qubit gauge potential.
pub fn two_qubit_agp_operator() -> Result<OperatorMatrix> {
    use PauliLabel::*;
    let mut s = OperatorSum::new(2);
    s.add(1.0, &[(0, X), (1, Y)])?;
    s.add(1.0, &[(0, Y), (1, X)])?;
    materialize(&s)
}

/// Prefactor `J h_z / (2 (J² + 4 (λ-1)² h_z²))`.
pub fn two_qubit_agp_prefactor(p: &TwoQubitParams, lambda: f64) -> f64 {
    let c = (lambda - 1.0) * p.h_z;
    p.j * p.h_z / (2.0 * (p.j * p.j + 4.0 * c * c))
}

/// Closed-form gauge potential of the two-qubit model.
pub fn analytical_two_qubit_agp(p: &TwoQubitParams, lambda: f64) -> Result<AgpResult> {
    p.validate()?;
    Ok(AgpResult {
        matrix: two_qubit_agp_operator()?.scale(two_qubit_agp_prefactor(p, lambda)),
        lambda: Some(lambda),
        gauge: Gauge::ZeroDiagonal,
    })
}

/// `ad_h^n(x)` for n = 1, 3, 5, ..., 2·cutoff-1.
fn odd_nested_commutators(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    cutoff: usize,
) -> Result<Vec<OperatorMatrix>> {
    let mut out = Vec::with_capacity(cutoff);
    let mut cur = dh.clone();
    for k in 0..cutoff {
        cur = commutator(h, &cur)?;
        out.push(cur.clone());
        if k + 1 < cutoff {
            cur = commutator(h, &cur)?;
        }
    }
    Ok(out)
}

/// `i Σ_k α_k [H,[H,…[H, ∂_λH]]]` with `2k-1` nested commutators.
pub fn commutator_ansatz_agp(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    alphas: &AnsatzCoefficients,
) -> Result<OperatorMatrix> {
    let basis = odd_nested_commutators(h, dh, alphas.cutoff())?;
    let mut acc = OperatorMatrix::zeros(h.dim());
    for (c, &a) in basis.iter().zip(&alphas.alphas) {
        let mut term = c.scale_complex(I);
        term = term.scale(a);
        acc = &acc + &term;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct AnsatzFit {
    pub coefficients: AnsatzCoefficients,
    /// `‖target - ansatz‖_F`.
    pub residual: f64,
    /// Set when the commutator basis is numerically rank deficient; the
    /// coefficients are then the minimum-norm solution.
    pub rank_deficient: bool,
}

/// Least-squares projection of an arbitrary target onto the commutator ansatz.
pub fn fit_ansatz_to(
    target: &OperatorMatrix,
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    cutoff: usize,
) -> Result<AnsatzFit> {
    if cutoff == 0 {
        return Err(Error::Config("ansatz cutoff must be at least 1".into()));
    }
    let basis: Vec<OperatorMatrix> = odd_nested_commutators(h, dh, cutoff)?
        .into_iter()
        .map(|c| c.scale_complex(I))
        .collect();
    let d2 = h.dim() * h.dim();
    // Real least squares over (re, im) of every entry, with unit-norm columns.
    let mut a = DMatrix::<f64>::zeros(2 * d2, cutoff);
    let mut norms = vec![0.0; cutoff];
    let (hn, dn) = (h.frobenius_norm(), dh.frobenius_norm());
    let mut vanishing = false;
    for (k, c) in basis.iter().enumerate() {
        let n = c.frobenius_norm();
        // commutators at round-off level of their natural scale count as zero
        if n <= 1e-13 * hn.powi(2 * k as i32 + 1) * dn {
            vanishing = true;
            continue;
        }
        norms[k] = n;
        for (i, z) in c.iter().enumerate() {
            a[(2 * i, k)] = z.re / n;
            a[(2 * i + 1, k)] = z.im / n;
        }
    }
    let mut b = nalgebra::DVector::<f64>::zeros(2 * d2);
    for (i, z) in target.iter().enumerate() {
        b[2 * i] = z.re;
        b[2 * i + 1] = z.im;
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let rank_deficient = vanishing || smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol);
    let y = if smax == 0.0 {
        nalgebra::DVector::zeros(cutoff)
    } else {
        svd.solve(&b, tol)
            .map_err(|e| Error::Optimization(format!("ansatz fit: {e}")))?
    };
    let alphas: Vec<f64> = (0..cutoff)
        .map(|k| {
            if norms[k] == 0.0 {
                0.0
            } else {
                y[k] / norms[k]
            }
        })
        .collect();
    let coefficients = AnsatzCoefficients::new(alphas)?;
    let fitted = commutator_ansatz_agp(h, dh, &coefficients)?;
    let residual = (target - &fitted).frobenius_norm();
    Ok(AnsatzFit {
        coefficients,
        residual,
        rank_deficient,
    })
}

/// Fit α_1..α_cutoff to the spectral gauge potential of `(h, dh)`.
pub fn fit_ansatz_coefficients(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    cutoff: usize,
) -> Result<AnsatzFit> {
    let exact = exact_agp(h, dh)?;
    fit_ansatz_to(&exact.matrix, h, dh, cutoff)
}

/// Bessel function of the first kind, integer order, by power series.
/// Accurate for the moderate arguments (|x| ≲ 10) met here.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=n {
        term *= half / i as f64;
    }
    let q = -half * half;
    let mut sum = term;
    for m in 1..200 {
        term *= q / (m as f64 * (m + n as usize) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Closed-form drive coefficient β₁(λ) for the two-qubit model, in units
/// of ω₀, for the drive `λ̇ β₁ sin(ωt) ∂_λH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticalBeta {
    /// Leading order in gap/ω₀: `-1/(2(J² + 4(λ-1)² h_z²))`.
    SmallArgument,
    /// Exact high-frequency limit for finite gap/ω₀, including the frame
    /// correction of the `cos(ωt)` modulation: `-J₀(x)/(Δ J₁(x) ω₀)`,
    /// `x = Δ/ω₀`, `Δ = 2√(J² + 4(λ-1)² h_z²)`.
    #[default]
    Resummed,
}

impl AnalyticalBeta {
    pub fn beta1(self, p: &TwoQubitParams, lambda: f64, omega0: f64) -> f64 {
        let c = (lambda - 1.0) * p.h_z;
        let d = p.j * p.j + 4.0 * c * c;
        match self {
            AnalyticalBeta::SmallArgument => -1.0 / (2.0 * d),
            AnalyticalBeta::Resummed => {
                let gap = 2.0 * d.sqrt();
                let x = gap / omega0;
                -bessel_j(0, x) / (gap * bessel_j(1, x) * omega0)
            }
        }
    }
}

/// Per-harmonic constants `c_k` in `α_k = c_k β_k` (β in units of ω₀).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaAlphaCalibration {
    pub omega0: f64,
    pub constants: Vec<f64>,
    /// How each constant was obtained.
    pub sources: Vec<String>,
}

impl BetaAlphaCalibration {
    /// Calibrates `c_1` against the two-qubit closed forms and `c_2` against
    /// the period-averaged harmonic-2 drive of a two-spin transverse Ising
    /// model; both at λ = 0.5. The Ising transverse fields are unequal
    /// because with equal fields only one gap couples to `∂_λH` and the
    /// two commutator orders become linearly dependent.
    pub fn calibrate(omega0: f64) -> Result<Self> {
        let lambda = 0.5;
        let p = TwoQubitParams::default();
        let fam = two_qubit_model(&p)?;
        let fit = fit_ansatz_coefficients(&fam.at(lambda), fam.derivative(), 1)?;
        let beta = AnalyticalBeta::SmallArgument.beta1(&p, lambda, omega0);
        let c1 = fit.coefficients.alphas[0] / beta;

        let ising = ising_model(&calibration_ising())?.family(Default::default())?;
        let h = ising.at(lambda);
        let target = averaged_harmonic_drive(&h, ising.derivative(), 2, omega0)?;
        let fit2 = fit_ansatz_to(&target, &h, ising.derivative(), 2)?;
        // unit absolute drive b_2 = 1 corresponds to β_2 = 1/ω₀
        let c2 = fit2.coefficients.alphas[1] * omega0;

        Ok(Self {
            omega0,
            constants: vec![c1, c2],
            sources: vec![
                format!("two-qubit fit alpha_1 / small-argument beta_1 at lambda={lambda}"),
                format!("two-spin Ising period-averaged harmonic-2 drive at lambda={lambda}"),
            ],
        })
    }

    pub fn constant(&self, k: usize) -> Result<f64> {
        k.checked_sub(1)
            .and_then(|i| self.constants.get(i))
            .copied()
            .ok_or(Error::UncalibratedHarmonic(k))
    }
}

/// Two-spin transverse Ising model with unequal transverse fields, the
/// smallest Ising case whose gauge potential needs two commutator orders.
pub fn calibration_ising() -> IsingParams {
    IsingParams::uniform(2, 1.0).with_transverse(vec![1.0, 0.5])
}

/// Period average of the drive `sin((2k-1)ωt)·∂_λH` seen in the frame that
/// removes the `(ω/ω₀)cos(ωt)H` modulation, for unit drive amplitude:
/// `<m|·|n> = i J_{2k-1}((E_m-E_n)/ω₀) <m|∂_λH|n>`.
pub fn averaged_harmonic_drive(
    h: &OperatorMatrix,
    dh: &OperatorMatrix,
    k: usize,
    omega0: f64,
) -> Result<OperatorMatrix> {
    let eig = eigendecompose(h)?;
    let d = eig.to_eigenbasis(dh);
    let dim = h.dim();
    let order = (2 * k - 1) as u32;
    let mut m = DMatrix::<C64>::from_element(dim, dim, ZERO);
    for r in 0..dim {
        for c in 0..dim {
            let x = (eig.energies[r] - eig.energies[c]) / omega0;
            m[(r, c)] = I * bessel_j(order, x) * d[(r, c)];
        }
    }
    Ok(eig.from_eigenbasis(&m))
}

/// α_k = c_k β_k^(j) for segment `j` (1-based).
pub fn betas_to_alphas(
    b: &PiecewiseBeta,
    calibration: &BetaAlphaCalibration,
    segment: usize,
) -> Result<AnsatzCoefficients> {
    let mut alphas = Vec::with_capacity(b.harmonics());
    for k in 1..=b.harmonics() {
        alphas.push(calibration.constant(k)? * b.entry(k, segment)?);
    }
    AnsatzCoefficients::new(alphas)
}

/// Inverse of [`betas_to_alphas`] for a single segment.
pub fn alphas_to_betas(
    alphas: &AnsatzCoefficients,
    calibration: &BetaAlphaCalibration,
) -> Result<Vec<f64>> {
    alphas
        .alphas
        .iter()
        .enumerate()
        .map(|(i, a)| Ok(a / calibration.constant(i + 1)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        materialize,
        PauliLabel::{X, Z},
    };
    use approx::assert_relative_eq;

    fn z1() -> OperatorMatrix {
        let mut s = OperatorSum::new(1);
        s.add(1.0, &[(0, Z)]).unwrap();
        materialize(&s).unwrap()
    }

    #[test]
    fn commuting_pair_gives_zero() {
        let z = z1();
        let a = exact_agp(&z, &z).unwrap();
        assert_eq!(a.matrix.max_abs(), 0.0);
    }

    #[test]
    fn degenerate_coupled_levels_error() {
        let h = OperatorMatrix::zeros(2);
        let mut s = OperatorSum::new(1);
        s.add(1.0, &[(0, X)]).unwrap();
        let dh = materialize(&s).unwrap();
        assert!(matches!(
            exact_agp(&h, &dh),
            Err(Error::DegenerateCoupling { .. })
        ));
        // uncoupled degenerate pair is fine
        assert_eq!(exact_agp(&h, &z1()).unwrap().matrix.max_abs(), 0.0);
    }

    #[test]
    fn two_qubit_prefactors() {
        let p = TwoQubitParams::default();
        assert_relative_eq!(two_qubit_agp_prefactor(&p, 1.0), 2.5, epsilon = 1e-15);
        assert_relative_eq!(
            two_qubit_agp_prefactor(&p, 0.5),
            5.0 / (2.0 * 26.0),
            epsilon = 1e-15
        );
        assert!(two_qubit_agp_prefactor(&p, -1e8).abs() < 1e-14);
    }

    #[test]
    fn spectral_matches_closed_form_at_one_and_half() {
        let p = TwoQubitParams::default();
        let fam = two_qubit_model(&p).unwrap();
        for lambda in [0.5, 1.0] {
            let ex = exact_agp(&fam.at(lambda), fam.derivative()).unwrap();
            let an = analytical_two_qubit_agp(&p, lambda).unwrap();
            assert!(ex.matrix.max_abs_diff(&an.matrix) < 1e-12);
        }
    }

    #[test]
    fn zero_alphas_give_zero() {
        let fam = two_qubit_model(&TwoQubitParams::default()).unwrap();
        let a = AnsatzCoefficients::new(vec![0.0, 0.0]).unwrap();
        let m = commutator_ansatz_agp(&fam.at(0.3), fam.derivative(), &a).unwrap();
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn first_order_ansatz_is_i_alpha_commutator() {
        let fam = two_qubit_model(&TwoQubitParams::default()).unwrap();
        let h = fam.at(0.3);
        let a = AnsatzCoefficients::new(vec![0.7]).unwrap();
        let m = commutator_ansatz_agp(&h, fam.derivative(), &a).unwrap();
        let expected = commutator(&h, fam.derivative())
            .unwrap()
            .scale_complex(I * 0.7);
        assert!(m.max_abs_diff(&expected) < 1e-13);
        assert!(m.is_hermitian(1e-12));
    }

    #[test]
    fn proportional_derivative_fits_to_zero() {
        let fam = two_qubit_model(&TwoQubitParams::default()).unwrap();
        let h = fam.at(0.3);
        let dh = h.scale(2.0);
        let fit = fit_ansatz_coefficients(&h, &dh, 2).unwrap();
        assert!(fit.coefficients.alphas.iter().all(|a| *a == 0.0));
        assert!(fit.residual < 1e-14);
        assert!(fit.rank_deficient);
    }

    #[test]
    fn bessel_values() {
        // reference values J_0(1), J_1(1), J_3(2)
        assert_relative_eq!(bessel_j(0, 1.0), 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(1, 1.0), 0.440_050_585_744_933_5, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(3, 2.0), 0.128_943_249_474_402_05, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(1, -0.3), -bessel_j(1, 0.3), epsilon = 1e-17);
    }

    #[test]
    fn calibration_identity_and_round_trip() {
        let omega0 = 2.0 * std::f64::consts::PI / 0.1;
        let cal = BetaAlphaCalibration::calibrate(omega0).unwrap();
        assert_relative_eq!(cal.constants[0], 0.5, epsilon = 1e-12);
        let p = TwoQubitParams::default();
        let b1 = AnalyticalBeta::SmallArgument.beta1(&p, 0.5, omega0);
        let table = PiecewiseBeta::new(vec![vec![b1]], 0.1, None).unwrap();
        let alphas = betas_to_alphas(&table, &cal, 1).unwrap();
        let fam = two_qubit_model(&p).unwrap();
        let fit = fit_ansatz_coefficients(&fam.at(0.5), fam.derivative(), 1).unwrap();
        assert_relative_eq!(
            alphas.alphas[0],
            fit.coefficients.alphas[0],
            max_relative = 1e-12
        );
        let back = alphas_to_betas(&alphas, &cal).unwrap();
        assert!((back[0] - b1).abs() <= 1e-12 * b1.abs());

        let zero = PiecewiseBeta::zeros(2, 3, 0.1).unwrap();
        assert!(betas_to_alphas(&zero, &cal, 2)
            .unwrap()
            .alphas
            .iter()
            .all(|a| *a == 0.0));
        let three = PiecewiseBeta::zeros(3, 1, 0.1).unwrap();
        assert!(matches!(
            betas_to_alphas(&three, &cal, 1),
            Err(Error::UncalibratedHarmonic(3))
        ));
    }

    #[test]
    fn harmonic_two_constant_matches_leading_order() {
        // leading order of J_3: x^3/48, so c_2 ≈ 1/(48 ω₀²)
        let omega0 = 2.0 * std::f64::consts::PI / 0.1;
        let cal = BetaAlphaCalibration::calibrate(omega0).unwrap();
        assert_relative_eq!(
            cal.constants[1],
            1.0 / (48.0 * omega0 * omega0),
            max_relative = 1e-2
        );
    }
}
