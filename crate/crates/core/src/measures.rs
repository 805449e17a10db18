//! Measure identities: which construction (NumSet, EigV, Deg, Ecc, LexiSim)
//! over which similarity kernel, with the `Deg(E)`-style naming used in all
//! outputs.

use std::fmt;
use std::str::FromStr;

use crate::similarity::SimilarityKernel;
use crate::spectral::MeasureKind;

/// A concrete measure: the construction plus, for the spectral family, the
/// similarity kernel feeding it. NumSet is NLI-only and LexiSim is
/// ROUGE-L-only, so neither carries a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub kernel: Option<SimilarityKernel>,
}

impl MeasureSpec {
    pub fn num_set() -> Self {
        Self {
            kind: MeasureKind::NumSet,
            kernel: None,
        }
    }

    pub fn lexi_sim() -> Self {
        Self {
            kind: MeasureKind::LexiSim,
            kernel: None,
        }
    }

    pub fn spectral(kind: MeasureKind, kernel: SimilarityKernel) -> Self {
        debug_assert!(matches!(
            kind,
            MeasureKind::EigV | MeasureKind::Deg | MeasureKind::Ecc
        ));
        Self {
            kind,
            kernel: Some(kernel),
        }
    }

    /// Whether this measure produces a per-response confidence vector.
    pub fn has_confidence(&self) -> bool {
        matches!(self.kind, MeasureKind::Deg | MeasureKind::Ecc)
    }

    /// Whether scoring needs pairwise NLI logits.
    pub fn needs_nli(&self) -> bool {
        self.kind == MeasureKind::NumSet || self.kernel.is_some_and(|k| k.needs_nli())
    }

    /// Whether the NLI softmax temperature is a hyperparameter of this
    /// measure. NumSet compares entail vs contra probabilities, whose order
    /// the temperature cannot change.
    pub fn has_temperature(&self) -> bool {
        self.kernel.is_some_and(|k| k.needs_nli())
    }

    /// Whether the eigenvalue threshold is a hyperparameter (Ecc only).
    pub fn has_threshold(&self) -> bool {
        self.kind == MeasureKind::Ecc
    }

    /// The full measure set the CLI scores by default: NumSet, LexiSim, and
    /// the spectral constructions over the J/E/C kernels.
    pub fn default_set() -> Vec<MeasureSpec> {
        let mut out = vec![Self::num_set(), Self::lexi_sim()];
        for kernel in [
            SimilarityKernel::Jaccard,
            SimilarityKernel::NliEntail,
            SimilarityKernel::NliContra,
        ] {
            for kind in [MeasureKind::EigV, MeasureKind::Ecc, MeasureKind::Deg] {
                out.push(Self::spectral(kind, kernel));
            }
        }
        out
    }

    /// The spectral measures over one kernel, or LexiSim for the ROUGE-L
    /// kernel (which feeds no spectral measure in the default set).
    pub fn kernel_set(kernel: SimilarityKernel) -> Vec<MeasureSpec> {
        match kernel {
            SimilarityKernel::RougeL => vec![Self::lexi_sim()],
            _ => [MeasureKind::EigV, MeasureKind::Ecc, MeasureKind::Deg]
                .into_iter()
                .map(|kind| Self::spectral(kind, kernel))
                .collect(),
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kernel {
            Some(kernel) => write!(f, "{}({})", self.kind, kernel.letter()),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = String;

    /// Parse `NumSet`, `LexiSim`, or `Kind(K)` with kind in
    /// {EigV, Deg, Ecc} and K in {J, E, C, R} (case-insensitive, also
    /// accepts `deg_e` / `deg-e`).
    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "numset" | "num_set" => return Ok(Self::num_set()),
            "lexisim" | "lexi_sim" => return Ok(Self::lexi_sim()),
            _ => {}
        }
        let (kind_str, kernel_str) = if let Some(open) = lower.find('(') {
            let close = lower
                .rfind(')')
                .ok_or_else(|| format!("unbalanced parenthesis in `{s}`"))?;
            (&lower[..open], &lower[open + 1..close])
        } else if let Some((k, v)) = lower.split_once(['_', '-']) {
            (k, v)
        } else {
            return Err(format!(
                "unknown measure `{s}` (expected NumSet, LexiSim, or EigV/Deg/Ecc with a kernel suffix like Deg(E))"
            ));
        };
        let kind = match kind_str {
            "eigv" => MeasureKind::EigV,
            "deg" => MeasureKind::Deg,
            "ecc" => MeasureKind::Ecc,
            other => return Err(format!("unknown measure kind `{other}`")),
        };
        let kernel: SimilarityKernel = kernel_str.parse()?;
        Ok(Self::spectral(kind, kernel))
    }
}
