use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Rbf,
    Log,
    Cosine,
    Poly,
}

impl KernelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Log => "log",
            KernelKind::Cosine => "cosine",
            KernelKind::Poly => "poly",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            KernelKind::Linear => 0,
            KernelKind::Rbf => 1,
            KernelKind::Log => 2,
            KernelKind::Cosine => 3,
            KernelKind::Poly => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [KernelKind::Linear, KernelKind::Rbf, KernelKind::Log, KernelKind::Cosine, KernelKind::Poly]
            .get(code as usize)
            .copied()
    }
}

/// Kernel function and its hyperparameters. Fields irrelevant to `kind`
/// are carried along but ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width and polynomial scale.
    pub gamma: f64,
    /// Exponent of the log kernel.
    pub d: f64,
    pub degree: u32,
    pub coef0: f64,
}

impl KernelSpec {
    pub const DEFAULT_LOG_EXPONENT: f64 = 2.0;

    /// Defaults for feature dimension `dim`: γ = 1/dim, d = 2, degree 3,
    /// coef0 0.
    pub fn with_defaults(kind: KernelKind, dim: usize) -> Self {
        Self {
            kind,
            gamma: 1.0 / dim.max(1) as f64,
            d: Self::DEFAULT_LOG_EXPONENT,
            degree: 3,
            coef0: 0.0,
        }
    }

    pub fn linear() -> Self {
        Self::with_defaults(KernelKind::Linear, 1)
    }

    pub fn rbf(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::with_defaults(KernelKind::Rbf, 1)
        }
    }

    pub fn log(d: f64) -> Self {
        Self {
            d,
            ..Self::with_defaults(KernelKind::Log, 1)
        }
    }

    pub fn cosine() -> Self {
        Self::with_defaults(KernelKind::Cosine, 1)
    }

    pub fn poly(gamma: f64, degree: u32, coef0: f64) -> Self {
        Self {
            gamma,
            degree,
            coef0,
            ..Self::with_defaults(KernelKind::Poly, 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self.kind {
            KernelKind::Rbf | KernelKind::Poly if !(self.gamma > 0.0 && self.gamma.is_finite()) => {
                bad(format!("{} kernel needs gamma > 0, got {}", self.kind.as_str(), self.gamma))
            }
            KernelKind::Log if !(self.d > 0.0 && self.d.is_finite()) => {
                bad(format!("log kernel needs d > 0, got {}", self.d))
            }
            KernelKind::Poly if self.degree == 0 => bad("poly kernel needs degree >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Evaluates `k(x, y)` in 64-bit arithmetic.
    pub fn eval(&self, x: &[f32], y: &[f32]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::dim("kernel operand", x.len(), y.len()));
        }
        let dot = || x.iter().zip(y).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>();
        let dist2 = || {
            x.iter()
                .zip(y)
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
        };
        Ok(match self.kind {
            KernelKind::Linear => dot(),
            KernelKind::Rbf => (-self.gamma * dist2()).exp(),
            KernelKind::Log => -(dist2().powf(self.d / 2.0)).ln_1p(),
            KernelKind::Cosine => {
                let nx = x.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
                let ny = y.iter().map(|&b| (b as f64).powi(2)).sum::<f64>().sqrt();
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::Domain("cosine kernel of a zero vector".into()));
                }
                dot() / (nx * ny)
            }
            KernelKind::Poly => (self.gamma * dot() + self.coef0).powi(self.degree as i32),
        })
    }

    /// Parses `kind[:key=value]...`, e.g. `log:d=2` or
    /// `poly:gamma=0.5:degree=3:coef0=1`. Unset parameters take the
    /// defaults for `feature_dim`.
    pub fn parse(text: &str, feature_dim: usize) -> Result<Self> {
        let mut parts = text.trim().split(':');
        let kind = match parts.next().unwrap_or("") {
            "linear" => KernelKind::Linear,
            "rbf" => KernelKind::Rbf,
            "log" => KernelKind::Log,
            "cosine" => KernelKind::Cosine,
            "poly" => KernelKind::Poly,
            other => return Err(Error::Config(format!("unknown kernel '{other}'"))),
        };
        let mut spec = Self::with_defaults(kind, feature_dim);
        for part in parts {
            let bad = || Error::Config(format!("bad kernel parameter '{part}' in '{text}'"));
            let (key, value) = part.split_once('=').ok_or_else(bad)?;
            match (kind, key) {
                (KernelKind::Rbf | KernelKind::Poly, "gamma") => spec.gamma = value.parse().map_err(|_| bad())?,
                (KernelKind::Log, "d") => spec.d = value.parse().map_err(|_| bad())?,
                (KernelKind::Poly, "degree") => spec.degree = value.parse().map_err(|_| bad())?,
                (KernelKind::Poly, "coef0") => spec.coef0 = value.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match self.kind {
            KernelKind::Linear | KernelKind::Cosine => self.kind.as_str().to_string(),
            KernelKind::Rbf => format!("rbf(gamma={})", self.gamma),
            KernelKind::Log => format!("log(d={})", self.d),
            KernelKind::Poly => format!("poly(gamma={};degree={};coef0={})", self.gamma, self.degree, self.coef0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_specs() {
        let label = |t: &str| KernelSpec::parse(t, 384).unwrap().label();
        assert_eq!(label("log"), "log(d=2)");
        assert_eq!(label("log:d=1.5"), "log(d=1.5)");
        assert_eq!(KernelSpec::parse("rbf", 4).unwrap().gamma, 0.25);
        assert_eq!(label("poly:gamma=0.5:degree=2:coef0=1"), KernelSpec::poly(0.5, 2, 1.0).label());
        for bad in ["sigmoid", "rbf:gamma=-1", "log:gamma=1", "poly:degree", "linear:d=2"] {
            assert!(matches!(KernelSpec::parse(bad, 8), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn worked_values() {
        let x = [0.0f32, 0.0];
        let y = [1.0f32, 1.0];
        assert_eq!(KernelSpec::log(2.0).eval(&y, &y).unwrap(), 0.0);
        assert!((KernelSpec::log(2.0).eval(&x, &y).unwrap() + 3f64.ln()).abs() < 1e-12);
        assert_eq!(KernelSpec::rbf(0.5).eval(&y, &y).unwrap(), 1.0);
        assert_eq!(KernelSpec::linear().eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let c = KernelSpec::cosine().eval(&[1.0, -2.0, 0.5], &[3.0, -6.0, 1.5]).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert_eq!(KernelSpec::poly(1.0, 2, 1.0).eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 144.0);
    }

    #[test]
    fn cosine_zero_vector_is_domain_error() {
        assert!(matches!(
            KernelSpec::cosine().eval(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::rbf(0.0).validate().is_err());
        assert!(KernelSpec::log(-1.0).validate().is_err());
        assert!(KernelSpec::poly(1.0, 0, 0.0).validate().is_err());
        assert!(KernelSpec::with_defaults(KernelKind::Rbf, 384).validate().is_ok());
        assert_eq!(KernelSpec::with_defaults(KernelKind::Rbf, 384).gamma, 1.0 / 384.0);
        assert!(KernelSpec::linear().eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(xs in proptest::collection::vec(-3.0f32..3.0, 8), ys in proptest::collection::vec(-3.0f32..3.0, 8)) {
            prop_assume!(xs.iter().any(|&v| v != 0.0) && ys.iter().any(|&v| v != 0.0));
            for kind in [KernelKind::Linear, KernelKind::Rbf, KernelKind::Log, KernelKind::Cosine, KernelKind::Poly] {
                let k = KernelSpec::with_defaults(kind, 8);
                prop_assert_eq!(k.eval(&xs, &ys).unwrap(), k.eval(&ys, &xs).unwrap());
            }
        }
    }
}
