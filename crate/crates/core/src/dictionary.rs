//! Per-level clustering of IMFs into a fixed atom budget.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::emd::ImfSet;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng;

/// Per-level IMF matrices `M_q`; columns are the nonzero level-`q` modes in
/// frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBank {
    pub levels: Vec<Matrix>,
    pub n: usize,
}

impl LevelBank {
    pub fn columns_at(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, Matrix::cols)
    }
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

pub fn collect_levels(sets: &[ImfSet], levels: usize) -> Result<LevelBank> {
    let first = sets.first().ok_or_else(|| Error::Empty("no IMF sets to collect".into()))?;
    let n = first.len();
    let mut cols: Vec<Vec<&[f64]>> = vec![Vec::new(); levels];
    for set in sets {
        if set.len() != n {
            return Err(dim_err("IMF length", n, set.len()));
        }
        for (q, bucket) in cols.iter_mut().enumerate() {
            if let Some(imf) = set.imfs.get(q) {
                if !is_zero(imf) {
                    bucket.push(imf);
                }
            }
        }
    }
    let levels = cols.iter().map(|c| Matrix::from_columns(n, c)).collect::<Result<Vec<_>>>()?;
    Ok(LevelBank { levels, n })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// `dim × k`.
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub objective: f64,
    /// Objective after every Lloyd iteration.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Tolerance for the monotonicity assertion; summation order changes between
/// the two objective evaluations.
fn objective_slack(obj: f64) -> f64 {
    1e-12 * obj.abs() + 1e-300
}

/// k-means++ seeding: first centre uniform, the rest with probability
/// proportional to squared distance to the nearest chosen centre.
fn plus_plus(points: &Matrix, k: usize, rng: &mut rng::SeededRng) -> Vec<usize> {
    let count = points.cols();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..count));
    let mut nearest: Vec<f64> =
        points.columns().map(|p| sq_dist(p, points.col(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // only duplicates left; take the first unused index
            (0..count).find(|i| !chosen.contains(i)).expect("k ≤ count")
        };
        chosen.push(pick);
        let c = points.col(pick);
        for (w, p) in nearest.iter_mut().zip(points.columns()) {
            *w = w.min(sq_dist(p, c));
        }
    }
    chosen
}

fn assign(points: &Matrix, centroids: &Matrix, out: &mut [usize], dists: &mut [f64]) {
    for (i, p) in points.columns().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centroids.columns().enumerate() {
            let d = sq_dist(p, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        out[i] = best;
        dists[i] = best_d;
    }
}

/// Lloyd's algorithm with k-means++ seeding on the columns of `points`.
///
/// Empty clusters are re-seeded with the point farthest from its centroid.
/// The objective is asserted non-increasing at every step.
pub fn kmeans(points: &Matrix, cfg: &KMeansConfig) -> Result<KMeans> {
    let count = points.cols();
    let dim = points.rows();
    let k = cfg.k;
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > count {
        return Err(Error::Config(alloc::format!("k = {k} exceeds the {count} points")));
    }
    let mut rng = rng::seeded(cfg.seed);
    let seeds = plus_plus(points, k, &mut rng);
    let mut centroids = Matrix::from_fn(dim, k, |i, j| points.get(i, seeds[j]));
    let mut assignments = vec![0; count];
    let mut dists = vec![0.0; count];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut objective = f64::INFINITY;

    for _ in 0..cfg.max_iters.max(1) {
        assign(points, &centroids, &mut assignments, &mut dists);
        repair_empty(points, &mut centroids, &mut assignments, &mut dists);
        let assigned: f64 = dists.iter().sum();
        assert!(
            assigned <= prev + objective_slack(prev),
            "k-means objective increased in assignment: {prev} -> {assigned}"
        );

        let mut sums = Matrix::zeros(dim, k);
        let mut sizes = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sizes[a] += 1;
            sums.col_mut(a).iter_mut().zip(points.col(i)).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            if sizes[j] > 0 {
                let inv = 1.0 / sizes[j] as f64;
                let dst = centroids.col_mut(j);
                dst.iter_mut().zip(sums.col(j)).for_each(|(c, s)| *c = s * inv);
            }
        }
        objective = points
            .columns()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, centroids.col(a)))
            .sum();
        assert!(
            objective <= assigned + objective_slack(assigned),
            "k-means objective increased in update: {assigned} -> {objective}"
        );
        history.push(objective);
        let converged = prev.is_finite()
            && (prev - objective) <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE);
        prev = objective;
        if converged || objective == 0.0 {
            break;
        }
    }
    Ok(KMeans { centroids, assignments, objective, history })
}

/// Moves each empty cluster onto the point currently farthest from its
/// centroid. That point's distance drops to zero, so the objective can only
/// decrease.
fn repair_empty(points: &Matrix, centroids: &mut Matrix, assignments: &mut [usize], dists: &mut [f64]) {
    let k = centroids.cols();
    let mut sizes = vec![0usize; k];
    assignments.iter().for_each(|&a| sizes[a] += 1);
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let far = (0..points.cols())
            .filter(|&i| sizes[assignments[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(i) = far else { break };
        if dists[i] == 0.0 {
            // everything sits on a centroid already; duplicates cannot be split
            break;
        }
        centroids.col_mut(j).copy_from_slice(points.col(i));
        sizes[assignments[i]] -= 1;
        sizes[j] = 1;
        assignments[i] = j;
        dists[i] = 0.0;
    }
}

/// Atom budget per IMF level.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    /// `K_q` for `q = 1..J`.
    pub per_level_atoms: Vec<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self { per_level_atoms: vec![140, 140, 110, 110, 100], max_iters: 100, tol: 1e-6, seed: 0 }
    }
}

impl ClusterSpec {
    pub fn atoms(&self) -> usize {
        self.per_level_atoms.iter().sum()
    }
}

/// Unit-norm atoms `Ψ` (n × d), ordered level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub atoms: Matrix,
    /// Zero-based IMF level of each atom.
    pub level_of_atom: Vec<usize>,
}

impl Dictionary {
    pub fn new(atoms: Matrix, level_of_atom: Vec<usize>) -> Result<Self> {
        if level_of_atom.len() != atoms.cols() {
            return Err(dim_err("level labels", atoms.cols(), level_of_atom.len()));
        }
        if level_of_atom.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("atoms must be ordered level-major".into()));
        }
        if !atoms.is_finite() {
            return Err(Error::Config("dictionary has non-finite entries".into()));
        }
        Ok(Self { atoms, level_of_atom })
    }

    pub fn n(&self) -> usize {
        self.atoms.rows()
    }

    pub fn d(&self) -> usize {
        self.atoms.cols()
    }

    /// Number of levels (one past the largest level label).
    pub fn levels(&self) -> usize {
        self.level_of_atom.last().map_or(0, |&q| q + 1)
    }

    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels()];
        self.level_of_atom.iter().for_each(|&q| counts[q] += 1);
        counts
    }

    pub fn atoms_at_level(&self, level: usize) -> impl Iterator<Item = usize> + '_ {
        self.level_of_atom.iter().enumerate().filter(move |(_, &q)| q == level).map(|(j, _)| j)
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let nv = norm2(v);
    if nv == 0.0 || !nv.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    true
}

/// Clusters each level's IMFs into `K_q` centroids and stacks the normalized
/// centroids as atoms, level by level. Level `q` uses seed `spec.seed ⊕ q`.
pub fn assemble_dictionary(bank: &LevelBank, spec: &ClusterSpec) -> Result<Dictionary> {
    if spec.per_level_atoms.is_empty() {
        return Err(Error::Config("no levels in the atom budget".into()));
    }
    for (q, &kq) in spec.per_level_atoms.iter().enumerate() {
        if kq == 0 {
            return Err(Error::Config(alloc::format!("level {} has a zero atom budget", q + 1)));
        }
        let have = bank.columns_at(q);
        if have < kq {
            return Err(Error::Config(alloc::format!(
                "level {} has {have} IMF columns but needs {kq} atoms",
                q + 1
            )));
        }
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(spec.atoms());
    let mut level_of_atom = Vec::with_capacity(spec.atoms());
    for (q, &kq) in spec.per_level_atoms.iter().enumerate() {
        let points = &bank.levels[q];
        let km = kmeans(
            points,
            &KMeansConfig { k: kq, max_iters: spec.max_iters, tol: spec.tol, seed: rng::derive(spec.seed, q as u64) },
        )?;
        // points ordered by distance to their centroid, farthest first, used
        // to replace centroids that collapse to zero
        let mut spare: Vec<usize> = (0..points.cols()).collect();
        spare.sort_by(|&a, &b| {
            let da = sq_dist(points.col(a), km.centroids.col(km.assignments[a]));
            let db = sq_dist(points.col(b), km.centroids.col(km.assignments[b]));
            db.total_cmp(&da).then(a.cmp(&b))
        });
        let mut spare = spare.into_iter();
        for c in km.centroids.columns() {
            let mut atom = c.to_vec();
            while !normalize(&mut atom) {
                let i = spare.next().ok_or_else(|| {
                    Error::Config(alloc::format!("level {} cannot fill its atom budget", q + 1))
                })?;
                atom = points.col(i).to_vec();
            }
            columns.push(atom);
            level_of_atom.push(q);
        }
    }
    let atoms = Matrix::from_columns(bank.n, &columns)?;
    Dictionary::new(atoms, level_of_atom)
}

/// `max_{i≠j} |⟨ψ_i, ψ_j⟩|`.
pub fn mutual_coherence(dict: &Dictionary) -> Result<f64> {
    let d = dict.d();
    if d < 2 {
        return Err(Error::Undefined("coherence needs at least two atoms".into()));
    }
    let mut mu: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            mu = mu.max(dot(dict.atoms.col(i), dict.atoms.col(j)).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// One online step: for each level, the level-`q` atom nearest to the
/// normalized incoming mode `u` moves to `normalize(a + η (u − a))`.
///
/// Zero modes leave their level untouched.
pub fn online_update(dict: &Dictionary, imfs: &ImfSet, learning_rate: f64) -> Result<Dictionary> {
    if imfs.len() != dict.n() {
        return Err(dim_err("IMF length", dict.n(), imfs.len()));
    }
    if !(learning_rate >= 0.0) {
        return Err(Error::Config("learning rate must be non-negative".into()));
    }
    let mut out = dict.clone();
    for (q, mode) in imfs.imfs.iter().enumerate().take(dict.levels()) {
        let mut u = mode.clone();
        if !normalize(&mut u) {
            continue;
        }
        let nearest = dict
            .atoms_at_level(q)
            .map(|j| (j, sq_dist(dict.atoms.col(j), &u)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((j, _)) = nearest else { continue };
        let mut moved: Vec<f64> =
            dict.atoms.col(j).iter().zip(&u).map(|(a, v)| a + learning_rate * (v - a)).collect();
        if normalize(&mut moved) {
            out.atoms.col_mut(j).copy_from_slice(&moved);
        }
    }
    Ok(out)
}
