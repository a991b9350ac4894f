//! Team objectives: query relevance, Vendi-score diversity, and the
//! average-similarity / max-similarity diagnostics used by ablations.

mod eigen;

use serde::{Deserialize, Serialize};

pub use eigen::{symmetric_eigenvalues, EigenError, OFF_DIAGONAL_TOLERANCE};

use crate::embedding::{cosine, Embedding, EmbeddingError};
use crate::generation::AgentSpec;

/// Largest negative eigenvalue mass tolerated as roundoff before the spectrum
/// is declared invalid.
pub const MAX_CLAMPED_MASS: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum ObjectiveError {
    #[error("team is empty")]
    EmptyTeam,
    #[error("member index {index} outside pool of {pool_size}")]
    IndexOutOfRange { index: usize, pool_size: usize },
    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

impl From<EigenError> for ObjectiveError {
    fn from(e: EigenError) -> Self {
        ObjectiveError::EigensolverFailure(e.to_string())
    }
}

/// Which agent fields are embedded for relevance and similarity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextPolicy {
    #[default]
    Description,
    NameAndDescription,
}

pub fn agent_text(agent: &AgentSpec, policy: TextPolicy) -> String {
    match policy {
        TextPolicy::Description => agent.description.clone(),
        TextPolicy::NameAndDescription if agent.description.is_empty() => agent.name.clone(),
        TextPolicy::NameAndDescription => format!("{}: {}", agent.name, agent.description),
    }
}

/// The second objective paired with relevance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectivePair {
    /// Relevance and Vendi score.
    #[default]
    RelVendi,
    /// Relevance and `1 − mean pairwise similarity`.
    RelDivAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveScores {
    pub relevance: f64,
    pub diversity: f64,
    pub team_size: usize,
}

/// Symmetric cosine-similarity matrix of a team, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Validates symmetry (1e-12) and the `[-1, 1]` range.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self, ObjectiveError> {
        if entries.len() != n * n {
            return Err(ObjectiveError::InvalidMatrix(format!(
                "{} entries for n = {n}",
                entries.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(ObjectiveError::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - entries[j * n + i]).abs() > 1e-12 {
                    return Err(ObjectiveError::InvalidMatrix(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Restriction to `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Result<SimilarityMatrix, ObjectiveError> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.n) {
            return Err(ObjectiveError::IndexOutOfRange {
                index,
                pool_size: self.n,
            });
        }
        let k = indices.len();
        let mut entries = Vec::with_capacity(k * k);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        Ok(SimilarityMatrix { n: k, entries })
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| self.get(i, j)))
    }
}

/// Eigenvalues of `S / n` after clamping roundoff negatives and renormalizing
/// to unit sum. Descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub eigenvalues: Vec<f64>,
}

/// Mean cosine between each member embedding and the query.
pub fn relevance(members: &[&Embedding], query: &Embedding) -> Result<f64, ObjectiveError> {
    if members.is_empty() {
        return Err(ObjectiveError::EmptyTeam);
    }
    let mut sum = 0.0;
    for m in members {
        sum += cosine(m, query)?;
    }
    Ok(sum / members.len() as f64)
}

pub fn similarity_matrix(members: &[&Embedding]) -> Result<SimilarityMatrix, ObjectiveError> {
    if members.is_empty() {
        return Err(ObjectiveError::EmptyTeam);
    }
    let n = members.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s = if i == j && !members[i].is_zero() {
                1.0
            } else {
                cosine(members[i], members[j])?
            };
            entries[i * n + j] = s;
            entries[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix { n, entries })
}

/// Normalized spectrum used by [`vendi_diversity`]. Empty when every member
/// is the zero sentinel.
pub fn vendi_spectrum(s: &SimilarityMatrix) -> Result<EigenSpectrum, ObjectiveError> {
    let n = s.size();
    if n == 0 {
        return Err(ObjectiveError::EmptyTeam);
    }
    let scaled: Vec<f64> = s.entries().iter().map(|v| v / n as f64).collect();
    let mut eig = symmetric_eigenvalues(&scaled, n)?;
    let clamped: f64 = eig.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    if clamped > MAX_CLAMPED_MASS {
        return Err(ObjectiveError::EigensolverFailure(format!(
            "negative eigenvalue mass {clamped:e} exceeds {MAX_CLAMPED_MASS:e}; matrix is not PSD"
        )));
    }
    for l in eig.iter_mut() {
        *l = l.max(0.0);
    }
    let total: f64 = eig.iter().sum();
    if total <= 0.0 {
        return Ok(EigenSpectrum {
            eigenvalues: Vec::new(),
        });
    }
    for l in eig.iter_mut() {
        *l /= total;
    }
    Ok(EigenSpectrum { eigenvalues: eig })
}

/// Vendi score: exponential of the Shannon entropy of the normalized
/// spectrum. In `[1, n]` for teams with nonzero embeddings, 0 for a team made
/// only of zero sentinels.
pub fn vendi_diversity(s: &SimilarityMatrix) -> Result<f64, ObjectiveError> {
    let spectrum = vendi_spectrum(s)?;
    if spectrum.eigenvalues.is_empty() {
        return Ok(0.0);
    }
    let entropy: f64 = spectrum
        .eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    Ok(entropy.exp().min(s.size() as f64))
}

/// `1 − mean(off-diagonal similarity)`; 1 for a single member.
pub fn avg_similarity_diversity(s: &SimilarityMatrix) -> f64 {
    let n = s.size();
    if n <= 1 {
        return 1.0;
    }
    let pairs = (n * (n - 1) / 2) as f64;
    1.0 - s.off_diagonal().sum::<f64>() / pairs
}

/// Largest off-diagonal similarity; 0 for a single member.
pub fn max_pairwise_similarity(s: &SimilarityMatrix) -> f64 {
    s.off_diagonal().fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.max(v)))
    })
    .unwrap_or(0.0)
}

/// The diversity objective for `pair`.
pub fn diversity(s: &SimilarityMatrix, pair: ObjectivePair) -> Result<f64, ObjectiveError> {
    match pair {
        ObjectivePair::RelVendi => vendi_diversity(s),
        ObjectivePair::RelDivAvg => Ok(avg_similarity_diversity(s)),
    }
}

/// Precomputed query cosines and pool similarity matrix; scores any team of
/// pool indices without touching embeddings again.
#[derive(Debug, Clone)]
pub struct PoolScorer {
    pair: ObjectivePair,
    query_cosines: Vec<f64>,
    similarity: SimilarityMatrix,
}

impl PoolScorer {
    pub fn new(
        pool: &[Embedding],
        query: &Embedding,
        pair: ObjectivePair,
    ) -> Result<Self, ObjectiveError> {
        if pool.is_empty() {
            return Err(ObjectiveError::EmptyTeam);
        }
        let query_cosines = pool
            .iter()
            .map(|e| cosine(e, query))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Embedding> = pool.iter().collect();
        Ok(PoolScorer {
            pair,
            query_cosines,
            similarity: similarity_matrix(&refs)?,
        })
    }

    pub fn pool_size(&self) -> usize {
        self.query_cosines.len()
    }

    pub fn objective_pair(&self) -> ObjectivePair {
        self.pair
    }

    pub fn pool_similarity(&self) -> &SimilarityMatrix {
        &self.similarity
    }

    pub fn team_similarity(&self, members: &[usize]) -> Result<SimilarityMatrix, ObjectiveError> {
        if members.is_empty() {
            return Err(ObjectiveError::EmptyTeam);
        }
        self.similarity.submatrix(members)
    }

    pub fn score(&self, members: &[usize]) -> Result<ObjectiveScores, ObjectiveError> {
        let s = self.team_similarity(members)?;
        let relevance =
            members.iter().map(|&i| self.query_cosines[i]).sum::<f64>() / members.len() as f64;
        Ok(ObjectiveScores {
            relevance,
            diversity: diversity(&s, self.pair)?,
            team_size: members.len(),
        })
    }
}
