//! Closed-form ridge-family precision estimators and the 2-step
//! glasso + ridge estimator.
//!
//! All of the Frobenius-penalized estimators share one kernel: for a symmetric
//! `M` and shift `c > 0`,
//!
//! ```text
//! Θ = [ (c·I + ¼ M²)^{1/2} + ½ M ]⁻¹  =  (1/c) [ (c·I + ¼ M²)^{1/2} − ½ M ]
//! ```
//!
//! which is the unique positive definite root of `M Θ + c Θ² = I`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glasso::{glasso_with, GlassoConfig, GlassoFit};
use crate::matcore::{logdet, min_eigenvalue, spd_inverse, spd_sqrt, SymMatrix};
use crate::scalar::Real;

/// Elastic-net tuning: overall strength `lambda >= 0` and L1 share `alpha ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningParams<T> {
    pub lambda: T,
    pub alpha: T,
}

impl<T: Real> TuningParams<T> {
    pub fn new(lambda: T, alpha: T) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(Self { lambda, alpha })
    }
}

/// Tuning of the generalized estimator: archetype blend `lambda1 ∈ [0, 1]`
/// and Frobenius strength `lambda2 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenTuningParams<T> {
    pub lambda1: T,
    pub lambda2: T,
}

impl<T: Real> GenTuningParams<T> {
    pub fn new(lambda1: T, lambda2: T) -> Result<Self> {
        if !(lambda1 >= T::zero() && lambda1 <= T::one()) {
            return Err(Error::InvalidInput(format!("lambda1 must lie in [0, 1], got {lambda1}")));
        }
        if !(lambda2 >= T::zero()) || !lambda2.is_finite() {
            return Err(Error::InvalidInput(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        Ok(Self { lambda1, lambda2 })
    }
}

/// Shrinkage target, resolved against a sample covariance at call time.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec<T> {
    Zero,
    Identity,
    /// `ν I` with `ν = p² / tr(S)`.
    ScalarNu,
    ScalarGamma(T),
    Custom(SymMatrix<T>),
}

impl<T: Real> TargetSpec<T> {
    pub fn resolve(&self, s: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        let p = s.dim();
        match self {
            TargetSpec::Zero => Ok(SymMatrix::zeros(p)),
            TargetSpec::Identity => Ok(SymMatrix::identity(p)),
            TargetSpec::ScalarNu => {
                let tr = s.trace();
                if !(tr > T::zero()) {
                    return Err(Error::InvalidInput(
                        "scalar target needs a sample covariance with positive trace".into(),
                    ));
                }
                let p_t = T::from_usize(p).unwrap();
                Ok(SymMatrix::scalar(p, p_t * p_t / tr))
            }
            TargetSpec::ScalarGamma(gamma) => {
                if !(*gamma >= T::zero()) {
                    return Err(Error::InvalidInput(format!("target scale must be >= 0, got {gamma}")));
                }
                Ok(SymMatrix::scalar(p, *gamma))
            }
            TargetSpec::Custom(t) => {
                s.check_same_dim(t)?;
                let min = min_eigenvalue(t)?;
                if min < -T::lit(T::PSD_CLAMP) {
                    return Err(Error::NotPositiveSemiDefinite {
                        min_eigenvalue: min.to_f64_lossy(),
                    });
                }
                Ok(t.clone())
            }
        }
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            TargetSpec::Zero => "zero",
            TargetSpec::Identity => "identity",
            TargetSpec::ScalarNu => "scalar_nu",
            TargetSpec::ScalarGamma(_) => "scalar_gamma",
            TargetSpec::Custom(_) => "custom",
        }
    }
}

/// Settings of the 2-step estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStepConfig {
    pub glasso: GlassoConfig,
    /// Use `λ(1−α)` instead of `λ` for the identity term inside the square
    /// root, which makes the estimator the exact stationary point of the
    /// inner problem for a fixed dual variable `U = W − S`.
    pub dual_consistent: bool,
}

fn check_lambda_positive<T: Real>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

fn check_pd<T: Real>(m: &SymMatrix<T>) -> Result<()> {
    let min = min_eigenvalue(m)?;
    if !(min > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `(c I + ¼ M²)^{1/2}`.
fn riccati_root<T: Real>(m: &SymMatrix<T>, shift: T) -> Result<SymMatrix<T>> {
    spd_sqrt(&m.square().scaled(T::lit(0.25)).add_diag(shift))
}

/// `[(c I + ¼ M²)^{1/2} + ½ M]⁻¹`.
pub(crate) fn riccati_inverse_form<T: Real>(m: &SymMatrix<T>, shift: T) -> Result<SymMatrix<T>> {
    let root = riccati_root(m, shift)?;
    spd_inverse(&SymMatrix::lin_comb(T::one(), &root, T::half(), m)?)
}

/// `(1/c) [(c I + ¼ M²)^{1/2} − ½ M]`, no inversion.
pub(crate) fn riccati_direct_form<T: Real>(m: &SymMatrix<T>, shift: T) -> Result<SymMatrix<T>> {
    let root = riccati_root(m, shift)?;
    let inv_c = T::one() / shift;
    SymMatrix::lin_comb(inv_c, &root, -T::half() * inv_c, m)
}

/// First archetypal ridge estimator `[(1−λ) S + λ Γ]⁻¹`, `λ ∈ (0, 1]`.
pub fn archetype1<T: Real>(s: &SymMatrix<T>, gamma: &SymMatrix<T>, lambda: T) -> Result<SymMatrix<T>> {
    if !(lambda > T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidInput(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    let blend = SymMatrix::lin_comb(T::one() - lambda, s, lambda, gamma)?;
    spd_inverse(&blend)
}

/// Second archetypal ridge estimator `[S + λ I]⁻¹`, `λ > 0`.
pub fn archetype2<T: Real>(s: &SymMatrix<T>, lambda: T) -> Result<SymMatrix<T>> {
    check_lambda_positive(lambda)?;
    spd_inverse(&s.add_diag(lambda))
}

/// Alternative (type-I) ridge estimator shrinking towards the positive
/// definite target `t`, via the inverse form.
pub fn alt_ridge_i<T: Real>(s: &SymMatrix<T>, t: &SymMatrix<T>, lambda: T) -> Result<SymMatrix<T>> {
    check_lambda_positive(lambda)?;
    check_pd(t)?;
    let m = SymMatrix::lin_comb(T::one(), s, -lambda, t)?;
    riccati_inverse_form(&m, lambda)
}

/// Same estimator as [`alt_ridge_i`], evaluated without any matrix inversion.
pub fn alt_ridge_i_noinv<T: Real>(s: &SymMatrix<T>, t: &SymMatrix<T>, lambda: T) -> Result<SymMatrix<T>> {
    check_lambda_positive(lambda)?;
    check_pd(t)?;
    let m = SymMatrix::lin_comb(T::one(), s, -lambda, t)?;
    riccati_direct_form(&m, lambda)
}

/// Type-II ridge estimator: the type-I form with a zero target.
pub fn alt_ridge_ii<T: Real>(s: &SymMatrix<T>, lambda: T) -> Result<SymMatrix<T>> {
    check_lambda_positive(lambda)?;
    riccati_inverse_form(s, lambda)
}

/// 2-step estimator. Returns the estimate together with the glasso fit of the
/// first step (`None` when `alpha == 0`, where `W = S` is used directly).
pub fn two_step_with_fit<T: Real>(
    s: &SymMatrix<T>,
    t: &SymMatrix<T>,
    tp: TuningParams<T>,
    cfg: &TwoStepConfig,
) -> Result<(SymMatrix<T>, Option<GlassoFit<T>>)> {
    let tp = TuningParams::new(tp.lambda, tp.alpha)?;
    check_lambda_positive(tp.lambda)?;
    s.check_same_dim(t)?;
    for i in 0..t.dim() {
        if t.get(i, i) < T::zero() {
            return Err(Error::InvalidInput("two-step target must have a non-negative diagonal".into()));
        }
        for j in (i + 1)..t.dim() {
            if t.get(i, j) != T::zero() {
                return Err(Error::InvalidInput("two-step target must be diagonal".into()));
            }
        }
    }

    let (w, fit) = if tp.alpha == T::zero() {
        (s.clone(), None)
    } else {
        let fit = glasso_with(s, tp.alpha * tp.lambda, &cfg.glasso)?;
        if !fit.converged {
            return Err(Error::ConvergenceFailure {
                context: "graphical lasso (2-step first stage)".into(),
                iterations: fit.iterations,
                partial: Some(Box::new(fit.to_partial())),
            });
        }
        (fit.w.clone(), Some(fit))
    };

    let ridge = tp.lambda * (T::one() - tp.alpha);
    let shift = if cfg.dual_consistent { ridge } else { tp.lambda };
    let m = SymMatrix::lin_comb(T::one(), &w, -ridge, t)?;
    let theta = riccati_inverse_form(&m, shift)?;
    Ok((theta, fit))
}

/// 2-step estimator: glasso at penalty `αλ` gives `W`, then the type-I ridge
/// closed form is applied to `W` with target `(1−α)`-scaled strength.
pub fn two_step<T: Real>(
    s: &SymMatrix<T>,
    t: &SymMatrix<T>,
    tp: TuningParams<T>,
    cfg: &TwoStepConfig,
) -> Result<SymMatrix<T>> {
    two_step_with_fit(s, t, tp, cfg).map(|(theta, _)| theta)
}

/// Generalized estimator blending the first archetype with the Frobenius
/// ridge: `M = (1−λ₁) S + λ₁ Γ − λ₂ T` through the shared closed form.
pub fn generalized<T: Real>(
    s: &SymMatrix<T>,
    gamma: &SymMatrix<T>,
    t: &SymMatrix<T>,
    gp: GenTuningParams<T>,
) -> Result<SymMatrix<T>> {
    let gp = GenTuningParams::new(gp.lambda1, gp.lambda2)?;
    let blend = SymMatrix::lin_comb(T::one() - gp.lambda1, s, gp.lambda1, gamma)?;
    let m = SymMatrix::lin_comb(T::one(), &blend, -gp.lambda2, t)?;
    riccati_inverse_form(&m, gp.lambda2)
}

/// Estimator selector used by cross-validation and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Graphical lasso with penalty `lambda`.
    Glasso,
    /// `[(1−λ)S + λΓ]⁻¹` with the target as `Γ`; needs `lambda <= 1`.
    Archetype1,
    Archetype2,
    AltRidgeI,
    AltRidgeII,
    TwoStep,
}

impl Method {
    /// Whether the estimator has an `alpha` parameter to tune.
    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::TwoStep)
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Glasso => "glasso",
            Method::Archetype1 => "archetype1",
            Method::Archetype2 => "archetype2",
            Method::AltRidgeI => "alt_ridge_i",
            Method::AltRidgeII => "alt_ridge_ii",
            Method::TwoStep => "two_step",
        }
    }

    /// Fits the estimator; `alpha` is ignored unless [`Method::uses_alpha`].
    pub fn fit<T: Real>(
        self,
        s: &SymMatrix<T>,
        target: &SymMatrix<T>,
        lambda: T,
        alpha: T,
        cfg: &TwoStepConfig,
    ) -> Result<SymMatrix<T>> {
        match self {
            Method::Glasso => {
                check_lambda_positive(lambda)?;
                let fit = glasso_with(s, lambda, &cfg.glasso)?;
                if !fit.converged {
                    return Err(Error::ConvergenceFailure {
                        context: "graphical lasso".into(),
                        iterations: fit.iterations,
                        partial: Some(Box::new(fit.to_partial())),
                    });
                }
                Ok(fit.theta)
            }
            Method::Archetype1 => archetype1(s, target, lambda),
            Method::Archetype2 => archetype2(s, lambda),
            Method::AltRidgeI => alt_ridge_i(s, target, lambda),
            Method::AltRidgeII => alt_ridge_ii(s, lambda),
            Method::TwoStep => two_step(s, target, TuningParams::new(lambda, alpha)?, cfg),
        }
    }
}

/// Elastic-net penalized log-likelihood
/// `log det Θ − tr(SΘ) − λ(α‖Θ‖₁ + ½(1−α)‖Θ − T‖²_F)`.
pub fn en_objective<T: Real>(
    theta: &SymMatrix<T>,
    s: &SymMatrix<T>,
    t: &SymMatrix<T>,
    tp: TuningParams<T>,
) -> Result<T> {
    let ld = logdet(theta)?;
    let diff = theta - t;
    let frob_sq = diff.trace_product(&diff);
    let penalty = tp.alpha * theta.l1_norm() + T::half() * (T::one() - tp.alpha) * frob_sq;
    Ok(ld - s.trace_product(theta) - tp.lambda * penalty)
}

/// Max-abs of the ridge normal equation `Θ⁻¹ − S − λ(Θ − T)`.
pub fn stationarity_residual<T: Real>(
    theta: &SymMatrix<T>,
    s: &SymMatrix<T>,
    t: &SymMatrix<T>,
    lambda: T,
) -> Result<T> {
    let inv = spd_inverse(theta)?;
    let mut worst = T::zero();
    for i in 0..theta.dim() {
        for j in 0..theta.dim() {
            let r = inv.get(i, j) - s.get(i, j) - lambda * (theta.get(i, j) - t.get(i, j));
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Max-abs of `(S − λT) Θ + λ Θ² − I`.
pub fn riccati_residual<T: Real>(
    theta: &SymMatrix<T>,
    s: &SymMatrix<T>,
    t: &SymMatrix<T>,
    lambda: T,
) -> Result<T> {
    let m = SymMatrix::lin_comb(T::one(), s, -lambda, t)?;
    let lhs = m.matmul(theta)?;
    let sq = theta.square();
    let p = theta.dim();
    let mut worst = T::zero();
    for i in 0..p {
        for j in 0..p {
            let id = if i == j { T::one() } else { T::zero() };
            worst = worst.max((lhs.get(i, j) + lambda * sq.get(i, j) - id).abs());
        }
    }
    Ok(worst)
}
