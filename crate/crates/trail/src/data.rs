//! Dataset generation and a stable JSONL on-disk format.
//!
//! Offline data simulates cheap suboptimal interaction: states from a
//! designated distribution, actions uniform, successors from the true
//! dynamics. Expert data comes from geometric-horizon rollouts (per-step
//! termination probability `1−γ`), so the pooled pairs are distributed
//! exactly as the discounted visitation of the expert.
//!
//! Files hold one JSON record per line — `{"s":…,"a":…,"sp":…}` for
//! offline triples, `{"s":…,"a":…}` for expert pairs — with indices for
//! tabular data and arrays of 17-significant-digit decimal floats for
//! continuous data (lossless for 64-bit values). A `.gz` suffix gzips the
//! stream. Auxiliary fields (the recorded state distribution, episode
//! boundaries) live in a small `<file>.meta.json` sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::PointMassEnv;
use crate::mdp::{DistVector, TabularMdp, TabularPolicy};
use crate::rng::{sample_index, stream_rng};
use crate::{Error, Result};

/// Offline transition triples, tabular or continuous.
#[derive(Debug, Clone, PartialEq)]
pub enum OfflineData {
    Tabular(Vec<(usize, usize, usize)>),
    Continuous(Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub data: OfflineData,
    /// State distribution the tabular triples were drawn from, when known.
    pub d_off: Option<DistVector>,
}

impl OfflineDataset {
    pub fn len(&self) -> usize {
        match &self.data {
            OfflineData::Tabular(t) => t.len(),
            OfflineData::Continuous(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tabular(&self) -> Result<&[(usize, usize, usize)]> {
        match &self.data {
            OfflineData::Tabular(t) => Ok(t),
            OfflineData::Continuous(_) => Err(Error::ModeMismatch(
                "expected tabular offline data, found continuous".into(),
            )),
        }
    }

    pub fn continuous(&self) -> Result<&[(Vec<f64>, Vec<f64>, Vec<f64>)]> {
        match &self.data {
            OfflineData::Continuous(t) => Ok(t),
            OfflineData::Tabular(_) => Err(Error::ModeMismatch(
                "expected continuous offline data, found tabular".into(),
            )),
        }
    }

    /// Empirical `(s, a)` counts of a tabular dataset.
    pub fn pair_counts(&self, n_states: usize, n_actions: usize) -> Result<Vec<Vec<f64>>> {
        let triples = self.tabular()?;
        let mut counts = vec![vec![0.0; n_actions]; n_states];
        for &(s, a, _) in triples {
            counts[s][a] += 1.0;
        }
        Ok(counts)
    }

    /// Empirical next-state counts per `(s, a)` of a tabular dataset.
    pub fn transition_counts(&self, n_states: usize, n_actions: usize) -> Result<Vec<Vec<Vec<f64>>>> {
        let triples = self.tabular()?;
        let mut counts = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        for &(s, a, sp) in triples {
            counts[s][a][sp] += 1.0;
        }
        Ok(counts)
    }
}

/// Expert state–action pairs, tabular or continuous.
#[derive(Debug, Clone, PartialEq)]
pub enum ExpertData {
    Tabular(Vec<(usize, usize)>),
    Continuous(Vec<(Vec<f64>, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub data: ExpertData,
    /// Indices where episodes start (first episode starts at 0).
    pub episodes: Vec<usize>,
}

impl ExpertDataset {
    pub fn len(&self) -> usize {
        match &self.data {
            ExpertData::Tabular(t) => t.len(),
            ExpertData::Continuous(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tabular(&self) -> Result<&[(usize, usize)]> {
        match &self.data {
            ExpertData::Tabular(t) => Ok(t),
            ExpertData::Continuous(_) => Err(Error::ModeMismatch(
                "expected tabular expert data, found continuous".into(),
            )),
        }
    }

    pub fn continuous(&self) -> Result<&[(Vec<f64>, Vec<f64>)]> {
        match &self.data {
            ExpertData::Continuous(t) => Ok(t),
            ExpertData::Tabular(_) => Err(Error::ModeMismatch(
                "expected continuous expert data, found tabular".into(),
            )),
        }
    }
}

/// Draw `m` i.i.d. offline triples: `s ~ d_off`, `a` uniform, `s′ ~ T(s,a)`.
pub fn generate_offline(
    mdp: &TabularMdp,
    d_off: &DistVector,
    m: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    if m == 0 {
        return Err(Error::EmptyDataset("offline sample count must be at least 1".into()));
    }
    if d_off.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch(format!(
            "d_off has {} entries, MDP has {} states",
            d_off.len(),
            mdp.n_states()
        )));
    }
    let mut rng = stream_rng(seed, crate::rng::stream::OFFLINE_DATA);
    let mut triples = Vec::with_capacity(m);
    for _ in 0..m {
        let s = sample_index(d_off.as_slice(), &mut rng);
        let a = rng.gen_range(0..mdp.n_actions());
        let sp = sample_index(mdp.row(s, a), &mut rng);
        triples.push((s, a, sp));
    }
    Ok(OfflineDataset { data: OfflineData::Tabular(triples), d_off: Some(d_off.clone()) })
}

/// Roll out the expert with per-step termination probability `1−γ` until
/// `n` pairs are collected. Every visited pair is emitted, so the pooled
/// pairs are distributed as the expert's discounted visitation.
pub fn generate_expert(
    mdp: &TabularMdp,
    expert: &TabularPolicy,
    n: usize,
    seed: u64,
) -> Result<ExpertDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset("expert sample count must be at least 1".into()));
    }
    if expert.n_states() != mdp.n_states() || expert.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch(format!(
            "expert policy is {}×{}, MDP is {}×{}",
            expert.n_states(),
            expert.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    let mut rng = stream_rng(seed, crate::rng::stream::EXPERT_DATA);
    let mut pairs = Vec::with_capacity(n);
    let mut episodes = Vec::new();
    while pairs.len() < n {
        episodes.push(pairs.len());
        let mut s = sample_index(mdp.initial(), &mut rng);
        loop {
            let a = sample_index(expert.row(s), &mut rng);
            pairs.push((s, a));
            if pairs.len() == n || rng.gen::<f64>() < 1.0 - mdp.gamma() {
                break;
            }
            s = sample_index(mdp.row(s, a), &mut rng);
        }
    }
    Ok(ExpertDataset { data: ExpertData::Tabular(pairs), episodes })
}

/// Offline triples for the point-mass environment: states uniform in the
/// box, actions uniform in `[−1,1]^k`, successors from one dynamics step.
pub fn generate_offline_pointmass(env: &PointMassEnv, m: usize, seed: u64) -> Result<OfflineDataset> {
    if m == 0 {
        return Err(Error::EmptyDataset("offline sample count must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, crate::rng::stream::OFFLINE_DATA);
    let mut triples = Vec::with_capacity(m);
    for _ in 0..m {
        let s = [
            (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
            (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
        ];
        let a: Vec<f64> = (0..env.action_dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let sp = crate::envs::point_mass_step(env, s, &a, &mut rng);
        triples.push((s.to_vec(), a, sp.to_vec()));
    }
    Ok(OfflineDataset { data: OfflineData::Continuous(triples), d_off: None })
}

/// Expert rollouts for the point-mass environment: geometric horizon with
/// rate `1−gamma`, expert steering toward `target`.
pub fn generate_expert_pointmass(
    env: &PointMassEnv,
    target: [f64; 2],
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<ExpertDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset("expert sample count must be at least 1".into()));
    }
    assert!((0.0..1.0).contains(&gamma), "gamma must lie in [0, 1)");
    let mut rng = stream_rng(seed, crate::rng::stream::EXPERT_DATA);
    let mut pairs = Vec::with_capacity(n);
    let mut episodes = Vec::new();
    while pairs.len() < n {
        episodes.push(pairs.len());
        let mut s = [
            (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
            (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
        ];
        loop {
            let a = env.expert_action(s, target, 1.0);
            pairs.push((s.to_vec(), a.clone()));
            if pairs.len() == n || rng.gen::<f64>() < 1.0 - gamma {
                break;
            }
            s = crate::envs::point_mass_step(env, s, &a, &mut rng);
        }
    }
    Ok(ExpertDataset { data: ExpertData::Continuous(pairs), episodes })
}

// ---------------------------------------------------------------------------
// On-disk format.
// ---------------------------------------------------------------------------

/// Format a float with 17 significant digits (lossless for f64).
fn fmt_f64(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot serialize {x} to JSON")));
    }
    Ok(format!("{x:.16e}"))
}

fn fmt_vec(v: &[f64]) -> Result<String> {
    let parts: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect::<Result<_>>()?;
    Ok(format!("[{}]", parts.join(",")))
}

fn open_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufWriter::new(flate2::write::GzEncoder::new(
            file,
            flate2::Compression::default(),
        ))))
    } else {
        Ok(Box::new(BufWriter::new(file)))
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(flate2::read::GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_off: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    episodes: Vec<usize>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn write_sidecar(path: &Path, meta: &Sidecar) -> Result<()> {
    if meta.d_off.is_none() && meta.episodes.is_empty() {
        return Ok(());
    }
    let file = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), meta)?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(Sidecar::default());
    }
    Ok(serde_json::from_reader(BufReader::new(File::open(side)?))?)
}

pub fn save_offline(path: impl AsRef<Path>, dataset: &OfflineDataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    match &dataset.data {
        OfflineData::Tabular(triples) => {
            for &(s, a, sp) in triples {
                writeln!(w, "{{\"s\":{s},\"a\":{a},\"sp\":{sp}}}")?;
            }
        }
        OfflineData::Continuous(triples) => {
            for (s, a, sp) in triples {
                writeln!(
                    w,
                    "{{\"s\":{},\"a\":{},\"sp\":{}}}",
                    fmt_vec(s)?,
                    fmt_vec(a)?,
                    fmt_vec(sp)?
                )?;
            }
        }
    }
    w.flush()?;
    drop(w);
    write_sidecar(
        path,
        &Sidecar {
            d_off: dataset.d_off.as_ref().map(|d| d.as_slice().to_vec()),
            episodes: Vec::new(),
        },
    )
}

pub fn save_expert(path: impl AsRef<Path>, dataset: &ExpertDataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    match &dataset.data {
        ExpertData::Tabular(pairs) => {
            for &(s, a) in pairs {
                writeln!(w, "{{\"s\":{s},\"a\":{a}}}")?;
            }
        }
        ExpertData::Continuous(pairs) => {
            for (s, a) in pairs {
                writeln!(w, "{{\"s\":{},\"a\":{}}}", fmt_vec(s)?, fmt_vec(a)?)?;
            }
        }
    }
    w.flush()?;
    drop(w);
    write_sidecar(path, &Sidecar { d_off: None, episodes: dataset.episodes.clone() })
}

/// A field that is an index in tabular mode or a vector in continuous mode.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Field {
    Index(u64),
    Vector(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfflineRecord {
    s: Field,
    a: Field,
    sp: Field,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpertRecord {
    s: Field,
    a: Field,
}

fn bad_line(line: usize, msg: impl Into<String>) -> Error {
    Error::DataFormat { line, msg: msg.into() }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(open_reader(path)?);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(Error::EmptyDataset(format!("{} holds no records", path.display())));
    }
    Ok(lines)
}

fn check_range(line: usize, what: &str, value: u64, bound: usize) -> Result<usize> {
    if (value as usize) < bound {
        Ok(value as usize)
    } else {
        Err(bad_line(line, format!("{what} = {value} out of range (must be < {bound})")))
    }
}

/// Load offline triples. `bounds = (n_states, n_actions)` enables tabular
/// range checks; continuous files check dimensional consistency instead.
pub fn load_offline(
    path: impl AsRef<Path>,
    bounds: Option<(usize, usize)>,
) -> Result<OfflineDataset> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut tabular: Vec<(usize, usize, usize)> = Vec::new();
    let mut continuous: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for (lineno, text) in &lines {
        let rec: OfflineRecord = serde_json::from_str(text)
            .map_err(|e| bad_line(*lineno, format!("malformed record: {e}")))?;
        match (rec.s, rec.a, rec.sp) {
            (Field::Index(s), Field::Index(a), Field::Index(sp)) => {
                if !continuous.is_empty() {
                    return Err(bad_line(*lineno, "tabular record in a continuous file"));
                }
                let (s, a, sp) = match bounds {
                    Some((ns, na)) => (
                        check_range(*lineno, "s", s, ns)?,
                        check_range(*lineno, "a", a, na)?,
                        check_range(*lineno, "sp", sp, ns)?,
                    ),
                    None => (s as usize, a as usize, sp as usize),
                };
                tabular.push((s, a, sp));
            }
            (Field::Vector(s), Field::Vector(a), Field::Vector(sp)) => {
                if !tabular.is_empty() {
                    return Err(bad_line(*lineno, "continuous record in a tabular file"));
                }
                if let Some((ps, pa, psp)) = continuous.first() {
                    if s.len() != ps.len() || a.len() != pa.len() || sp.len() != psp.len() {
                        return Err(bad_line(*lineno, "vector lengths differ from first record"));
                    }
                }
                continuous.push((s, a, sp));
            }
            _ => return Err(bad_line(*lineno, "fields mix indices and vectors")),
        }
    }
    let meta = read_sidecar(path)?;
    let d_off = match meta.d_off {
        Some(v) => Some(DistVector::new(v)?),
        None => None,
    };
    let data = if tabular.is_empty() {
        OfflineData::Continuous(continuous)
    } else {
        OfflineData::Tabular(tabular)
    };
    Ok(OfflineDataset { data, d_off })
}

/// Load expert pairs; see [`load_offline`] for `bounds`.
pub fn load_expert(
    path: impl AsRef<Path>,
    bounds: Option<(usize, usize)>,
) -> Result<ExpertDataset> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut tabular: Vec<(usize, usize)> = Vec::new();
    let mut continuous: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (lineno, text) in &lines {
        let rec: ExpertRecord = serde_json::from_str(text)
            .map_err(|e| bad_line(*lineno, format!("malformed record: {e}")))?;
        match (rec.s, rec.a) {
            (Field::Index(s), Field::Index(a)) => {
                if !continuous.is_empty() {
                    return Err(bad_line(*lineno, "tabular record in a continuous file"));
                }
                let (s, a) = match bounds {
                    Some((ns, na)) => (
                        check_range(*lineno, "s", s, ns)?,
                        check_range(*lineno, "a", a, na)?,
                    ),
                    None => (s as usize, a as usize),
                };
                tabular.push((s, a));
            }
            (Field::Vector(s), Field::Vector(a)) => {
                if !tabular.is_empty() {
                    return Err(bad_line(*lineno, "continuous record in a tabular file"));
                }
                if let Some((ps, pa)) = continuous.first() {
                    if s.len() != ps.len() || a.len() != pa.len() {
                        return Err(bad_line(*lineno, "vector lengths differ from first record"));
                    }
                }
                continuous.push((s, a));
            }
            _ => return Err(bad_line(*lineno, "fields mix indices and vectors")),
        }
    }
    let meta = read_sidecar(path)?;
    let data = if tabular.is_empty() {
        ExpertData::Continuous(continuous)
    } else {
        ExpertData::Tabular(tabular)
    };
    Ok(ExpertDataset { data, episodes: meta.episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::DistVector;

    fn two_state_chain() -> (TabularMdp, TabularPolicy) {
        // Single action: stay in 0 w.p. 0.2, move to 1 w.p. 0.8; state 1
        // absorbing. Expert = the only policy.
        let transition = vec![
            vec![vec![0.2, 0.8]],
            vec![vec![0.0, 1.0]],
        ];
        let mdp = TabularMdp::new(2, 1, 0.9, vec![1.0, 0.0], transition).unwrap();
        let expert = TabularPolicy::uniform(2, 1);
        (mdp, expert)
    }

    fn small_mdp() -> TabularMdp {
        let transition = vec![
            vec![vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.25, 0.75]],
            vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.5, 0.5], vec![1.0, 0.0]],
        ];
        TabularMdp::new(2, 4, 0.8, vec![0.5, 0.5], transition).unwrap()
    }

    #[test]
    fn offline_generation_is_deterministic() {
        let mdp = small_mdp();
        let d = DistVector::uniform(2);
        let a = generate_offline(&mdp, &d, 500, 7).unwrap();
        let b = generate_offline(&mdp, &d, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_offline(&mdp, &d, 500, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn offline_actions_are_uniform() {
        let mdp = small_mdp();
        let d = DistVector::uniform(2);
        let ds = generate_offline(&mdp, &d, 100_000, 1).unwrap();
        let mut counts = [0.0f64; 4];
        for &(_, a, _) in ds.tabular().unwrap() {
            counts[a] += 1.0;
        }
        let expected = 25_000.0;
        let chi2: f64 = counts.iter().map(|&c| (c - expected).powi(2) / expected).sum();
        // 0.999 quantile of chi-squared with 3 degrees of freedom.
        assert!(chi2 < 16.266, "chi2 = {chi2}");
        for &c in &counts {
            let freq = c / 100_000.0;
            assert!((0.24..=0.26).contains(&freq), "action frequency {freq}");
        }
    }

    #[test]
    fn offline_point_mass_source_state() {
        let mdp = small_mdp();
        let d = DistVector::delta(1, 2);
        let ds = generate_offline(&mdp, &d, 200, 3).unwrap();
        assert!(ds.tabular().unwrap().iter().all(|&(s, _, _)| s == 1));
    }

    #[test]
    fn expert_visitation_matches_exact_occupancy() {
        let (mdp, expert) = two_state_chain();
        let exact = crate::mdp::state_visitation(&mdp, &expert).unwrap();
        let ds = generate_expert(&mdp, &expert, 100_000, 2).unwrap();
        let mut freq = [0.0f64; 2];
        for &(s, _) in ds.tabular().unwrap() {
            freq[s] += 1.0 / 100_000.0;
        }
        let tv = crate::mdp::tv(&freq, exact.as_slice()).unwrap();
        assert!(tv <= 0.02, "TV between rollout frequency and exact visitation: {tv}");
        assert!(!ds.episodes.is_empty());
        assert_eq!(ds.episodes[0], 0);
    }

    #[test]
    fn one_state_expert_pairs_identical() {
        let transition = vec![vec![vec![1.0]]];
        let mdp = TabularMdp::new(1, 1, 0.5, vec![1.0], transition).unwrap();
        let expert = TabularPolicy::uniform(1, 1);
        let ds = generate_expert(&mdp, &expert, 50, 0).unwrap();
        assert!(ds.tabular().unwrap().iter().all(|&p| p == (0, 0)));
    }

    #[test]
    fn tabular_round_trip_preserves_everything() {
        let mdp = small_mdp();
        let d = DistVector::new(vec![0.3, 0.7]).unwrap();
        let offline = generate_offline(&mdp, &d, 200, 5).unwrap();
        let expert = generate_expert(&mdp, &TabularPolicy::uniform(2, 4), 100, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opath = dir.path().join("offline.jsonl");
        let epath = dir.path().join("expert.jsonl");
        save_offline(&opath, &offline).unwrap();
        save_expert(&epath, &expert).unwrap();
        assert_eq!(load_offline(&opath, Some((2, 4))).unwrap(), offline);
        assert_eq!(load_expert(&epath, Some((2, 4))).unwrap(), expert);
    }

    #[test]
    fn continuous_round_trip_is_bit_exact() {
        let triples = vec![
            (vec![1.0 / 3.0, -0.0], vec![1e-300, 2.5e17], vec![f64::MIN_POSITIVE, 0.1 + 0.2]),
            (vec![-1.2345678901234567, 4.0], vec![0.0, -7.0], vec![9.99e-9, 1.0]),
        ];
        let ds = OfflineDataset { data: OfflineData::Continuous(triples.clone()), d_off: None };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cont.jsonl");
        save_offline(&path, &ds).unwrap();
        let back = load_offline(&path, None).unwrap();
        let got = back.continuous().unwrap();
        for (orig, loaded) in triples.iter().zip(got) {
            for (x, y) in orig.0.iter().zip(&loaded.0) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in orig.1.iter().zip(&loaded.1) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in orig.2.iter().zip(&loaded.2) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn gzip_round_trip() {
        let mdp = small_mdp();
        let d = DistVector::uniform(2);
        let offline = generate_offline(&mdp, &d, 300, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("offline.jsonl.gz");
        save_offline(&path, &offline).unwrap();
        // The payload must actually be gzip (magic bytes 0x1f 0x8b).
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..2], &[0x1f, 0x8b]);
        assert_eq!(load_offline(&path, Some((2, 4))).unwrap(), offline);
    }

    #[test]
    fn malformed_line_is_reported_with_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"s\":0,\"a\":1,\"sp\":0}\n{\"s\":0,\"a\":}\n").unwrap();
        match load_offline(&path, Some((2, 4))).unwrap_err() {
            Error::DataFormat { line, .. } => assert_eq!(line, 2),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn out_of_range_action_is_reported_with_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("range.jsonl");
        std::fs::write(&path, "{\"s\":0,\"a\":1,\"sp\":0}\n{\"s\":1,\"a\":9,\"sp\":0}\n").unwrap();
        match load_offline(&path, Some((2, 4))).unwrap_err() {
            Error::DataFormat { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains('9'), "message should name the value: {msg}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn empty_file_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(load_offline(&path, None).unwrap_err(), Error::EmptyDataset(_)));
    }

    #[test]
    fn point_mass_generation_shapes_and_determinism() {
        let env = PointMassEnv::new(8, 0.1, 0.01, 2.0, 0).unwrap();
        let off = generate_offline_pointmass(&env, 64, 4).unwrap();
        let off2 = generate_offline_pointmass(&env, 64, 4).unwrap();
        assert_eq!(off, off2);
        let t = off.continuous().unwrap();
        assert_eq!(t.len(), 64);
        assert_eq!(t[0].0.len(), 2);
        assert_eq!(t[0].1.len(), 8);
        assert_eq!(t[0].2.len(), 2);
        let exp = generate_expert_pointmass(&env, [0.0, 0.0], 0.95, 128, 4).unwrap();
        assert_eq!(exp.continuous().unwrap().len(), 128);
        assert!(!exp.episodes.is_empty());
    }
}
