use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tensorio::{AttentionTensor, HiddenStates};
use crate::{Error, Result};

const MASS_FLOOR: f64 = 1e-12;

/// Distance between adjacent-word representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceFn {
    L1,
    L2,
    /// Jensen-Shannon distance (square root of the divergence, natural log).
    Jsd,
    /// Hellinger distance.
    Hel,
}

impl DistanceFn {
    pub const ALL: [DistanceFn; 4] = [DistanceFn::L1, DistanceFn::L2, DistanceFn::Jsd, DistanceFn::Hel];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceFn::L1 => "L1",
            DistanceFn::L2 => "L2",
            DistanceFn::Jsd => "JSD",
            DistanceFn::Hel => "HEL",
        }
    }

    /// L1 and L2 compare hidden vectors; JSD and HEL compare attention rows.
    pub fn wants_attention(self) -> bool {
        matches!(self, DistanceFn::Jsd | DistanceFn::Hel)
    }
}

impl fmt::Display for DistanceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(DistanceFn::L1),
            "L2" => Ok(DistanceFn::L2),
            "JSD" => Ok(DistanceFn::Jsd),
            "HEL" => Ok(DistanceFn::Hel),
            _ => Err(Error::InvalidArgument(format!("unknown distance function `{s}`"))),
        }
    }
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        })
    }
}

/// L1 or L2 distance between two vectors.
pub fn vector_distance(r: &[f32], s: &[f32], f: DistanceFn) -> Result<f64> {
    same_len(r.len(), s.len())?;
    let diffs = r.iter().zip(s).map(|(a, b)| *a as f64 - *b as f64);
    match f {
        DistanceFn::L1 => Ok(diffs.map(f64::abs).sum()),
        DistanceFn::L2 => Ok(diffs.map(|d| d * d).sum::<f64>().sqrt()),
        other => Err(Error::SourceFunctionMismatch {
            function: other.to_string(),
            source_kind: "vector".into(),
        }),
    }
}

fn normalized(p: &[f32]) -> Result<Vec<f64>> {
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument("distribution entries must be finite and non-negative".into()));
    }
    let total: f64 = p.iter().map(|&x| x as f64).sum();
    if total <= 0.0 {
        return Err(Error::ZeroMassDistribution);
    }
    Ok(p.iter().map(|&x| x as f64 / total).collect())
}

fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, &y)| x * (x / y.max(MASS_FLOOR)).ln())
        .sum()
}

/// JSD or HEL between two attention rows, each rescaled to sum to one.
pub fn distribution_distance(p: &[f32], q: &[f32], f: DistanceFn) -> Result<f64> {
    same_len(p.len(), q.len())?;
    if !f.wants_attention() {
        return Err(Error::SourceFunctionMismatch {
            function: f.to_string(),
            source_kind: "distribution".into(),
        });
    }
    let p = normalized(p)?;
    let q = normalized(q)?;
    Ok(match f {
        DistanceFn::Jsd => {
            let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
            ((kl(&p, &m) + kl(&q, &m)) / 2.0).max(0.0).sqrt()
        }
        _ => {
            let sum: f64 = p.iter().zip(&q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
            (0.5 * sum).sqrt()
        }
    })
}

/// Which attention head feeds the distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadSelector {
    Head(usize),
    /// Arithmetic mean of all heads in the layer.
    Mean,
}

impl fmt::Display for HeadSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadSelector::Head(h) => write!(f, "{h}"),
            HeadSelector::Mean => f.write_str("AVG"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum DistanceSource<'a> {
    Hidden {
        states: &'a HiddenStates,
        layer: usize,
    },
    Attention {
        attention: &'a AttentionTensor,
        layer: usize,
        head: HeadSelector,
    },
}

/// Syntactic distance between every pair of adjacent words: `n - 1` values.
pub fn syntactic_distances(source: DistanceSource<'_>, f: DistanceFn) -> Result<Vec<f64>> {
    match source {
        DistanceSource::Hidden { states, layer } => {
            if f.wants_attention() {
                return Err(Error::SourceFunctionMismatch {
                    function: f.to_string(),
                    source_kind: "hidden".into(),
                });
            }
            check_layer(layer, states.layers())?;
            (1..states.n())
                .map(|i| vector_distance(states.vector(layer, i - 1), states.vector(layer, i), f))
                .collect()
        }
        DistanceSource::Attention {
            attention,
            layer,
            head,
        } => {
            if !f.wants_attention() {
                return Err(Error::SourceFunctionMismatch {
                    function: f.to_string(),
                    source_kind: "attention".into(),
                });
            }
            check_layer(layer, attention.layers())?;
            let n = attention.n();
            let matrix = match head {
                HeadSelector::Head(h) if h < attention.heads() => attention.matrix(layer, h).to_vec(),
                HeadSelector::Head(h) => {
                    return Err(Error::InvalidArgument(format!(
                        "head {h} out of range ({} heads)",
                        attention.heads()
                    )))
                }
                HeadSelector::Mean => attention.mean_over_heads(layer),
            };
            (1..n)
                .map(|i| distribution_distance(&matrix[(i - 1) * n..i * n], &matrix[i * n..(i + 1) * n], f))
                .collect()
        }
    }
}

fn check_layer(layer: usize, layers: usize) -> Result<()> {
    if layer < layers {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("layer {layer} out of range ({layers} layers)")))
    }
}

/// Shape of the right-skew bias term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BiasVariant {
    /// `λ · avg(d) · (1 - (i-1)/(m-1))`, decreasing linearly from the first
    /// gap to zero at the last.
    #[default]
    Ramp,
    /// `λ · avg(d) · (1 - 1/((m-1)(i-1)))`, undefined at `i = 1`, which is
    /// left unbiased. Kept for comparison only.
    Literal,
}

/// Adds a position-dependent bias to each distance (1-based position `i`
/// over `m = d.len()` gaps) that favours early splits, i.e. right-branching
/// trees. Vectors shorter than two are returned unchanged.
pub fn inject_bias(d: &[f64], lambda: f64, variant: BiasVariant) -> Vec<f64> {
    let m = d.len();
    if m < 2 || lambda == 0.0 {
        return d.to_vec();
    }
    let avg = d.iter().sum::<f64>() / m as f64;
    let denom = (m - 1) as f64;
    d.iter()
        .enumerate()
        .map(|(k, &di)| {
            let i = (k + 1) as f64;
            let shape = match variant {
                BiasVariant::Ramp => 1.0 - (i - 1.0) / denom,
                BiasVariant::Literal if k == 0 => 0.0,
                BiasVariant::Literal => 1.0 - 1.0 / (denom * (i - 1.0)),
            };
            di + lambda * avg * shape
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_examples() {
        assert_eq!(vector_distance(&[1.0, 2.0], &[4.0, 6.0], DistanceFn::L1).unwrap(), 7.0);
        assert_eq!(vector_distance(&[1.0, 2.0], &[4.0, 6.0], DistanceFn::L2).unwrap(), 5.0);
        assert_eq!(vector_distance(&[1.5, -2.0], &[1.5, -2.0], DistanceFn::L2).unwrap(), 0.0);
        assert!(vector_distance(&[1.0], &[1.0, 2.0], DistanceFn::L1).is_err());
        assert!(vector_distance(&[1.0], &[1.0], DistanceFn::Jsd).is_err());
    }

    #[test]
    fn distribution_examples() {
        let p = [1.0, 0.0];
        let q = [0.0, 1.0];
        assert_eq!(distribution_distance(&p, &q, DistanceFn::Hel).unwrap(), 1.0);
        let jsd = distribution_distance(&p, &q, DistanceFn::Jsd).unwrap();
        assert!((jsd - std::f64::consts::LN_2.sqrt()).abs() < 1e-12);
        assert!((jsd - 0.8326).abs() < 1e-4);
        let r = [0.2, 0.3, 0.5];
        assert_eq!(distribution_distance(&r, &r, DistanceFn::Jsd).unwrap(), 0.0);
        assert_eq!(distribution_distance(&r, &r, DistanceFn::Hel).unwrap(), 0.0);
        // Unnormalized inputs are rescaled first.
        let scaled = [2.0, 3.0, 5.0];
        assert!(distribution_distance(&r, &scaled, DistanceFn::Jsd).unwrap() < 1e-7);
        assert!(matches!(
            distribution_distance(&[0.0, 0.0], &r[..2], DistanceFn::Hel),
            Err(Error::ZeroMassDistribution)
        ));
        assert!(distribution_distance(&p, &q, DistanceFn::L1).is_err());
    }

    #[test]
    fn bias_examples() {
        assert_eq!(inject_bias(&[1.0, 2.0, 3.0], 1.0, BiasVariant::Ramp), vec![3.0, 3.0, 3.0]);
        assert_eq!(inject_bias(&[1.0, 2.0, 3.0], 0.0, BiasVariant::Ramp), vec![1.0, 2.0, 3.0]);
        assert_eq!(inject_bias(&[4.0], 1.0, BiasVariant::Ramp), vec![4.0]);
        let flat = inject_bias(&[1.0; 5], 0.5, BiasVariant::Ramp);
        assert!(flat.windows(2).all(|w| w[0] > w[1]));
        // Literal: i = 1 untouched, i = 2 gets λ·avg·(1 - 1/(m-1)).
        let lit = inject_bias(&[1.0, 1.0, 1.0], 1.0, BiasVariant::Literal);
        assert_eq!(lit, vec![1.0, 1.5, 1.75]);
    }

    #[test]
    fn source_function_pairing() {
        let h = HiddenStates::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let a = AttentionTensor::new(1, 1, 2, vec![0.5; 4]).unwrap();
        let hidden = DistanceSource::Hidden { states: &h, layer: 0 };
        assert_eq!(syntactic_distances(hidden, DistanceFn::L2).unwrap(), vec![1.0]);
        assert!(matches!(
            syntactic_distances(hidden, DistanceFn::Jsd),
            Err(Error::SourceFunctionMismatch { .. })
        ));
        let attn = DistanceSource::Attention {
            attention: &a,
            layer: 0,
            head: HeadSelector::Head(0),
        };
        assert_eq!(syntactic_distances(attn, DistanceFn::Hel).unwrap(), vec![0.0]);
        assert!(syntactic_distances(attn, DistanceFn::L1).is_err());
    }

    #[test]
    fn mean_source_matches_single_head() {
        let data = vec![0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4];
        let a = AttentionTensor::new(1, 1, 3, data).unwrap();
        for f in [DistanceFn::Jsd, DistanceFn::Hel] {
            let one = syntactic_distances(
                DistanceSource::Attention { attention: &a, layer: 0, head: HeadSelector::Head(0) },
                f,
            )
            .unwrap();
            let mean = syntactic_distances(
                DistanceSource::Attention { attention: &a, layer: 0, head: HeadSelector::Mean },
                f,
            )
            .unwrap();
            assert_eq!(one, mean);
        }
    }
}
