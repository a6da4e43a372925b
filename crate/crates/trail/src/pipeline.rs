//! End-to-end pipeline stages behind the subcommands.
//!
//! Every stage reads and writes one run directory (`config.out`):
//!
//! ```text
//! out/
//!   gen-data-manifest.json   offline.jsonl(+.meta.json)  expert.jsonl(+.meta.json)
//!   pretrain-manifest.json   pretrain/{factored.json | phi.bin psi.bin checkpoint.json train-log.csv}
//!   imitate-manifest.json    imitate/{policy.json phi.json decoder.json latent.json
//!                                     | latent.bin decoder.bin policy.bin imitate.json}
//!   eval-manifest.json       eval.json eval.csv
//!   sweep-manifest.json      sweep.csv sweep.json
//!   verify-bound-manifest.json  verify-bound.json
//! ```
//!
//! Each manifest embeds the full config and its SHA-256, so a directory is
//! reconstructible from any of its manifests alone. All parallelism draws
//! per-cell seeds, so results are independent of the worker pool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::tabular_bc;
use crate::config::{config_hash, EnvSpec, ExperimentConfig, Method, PointMassSpec};
use crate::data::{
    generate_expert, generate_expert_pointmass, generate_offline, generate_offline_pointmass,
    load_expert, load_offline, ExpertDataset, OfflineData, OfflineDataset,
};
use crate::ebm::{train_transition_ebm, EbmConfig, EnergyModel, NegativeMode, RffMap};
use crate::envs::{build_redundant_gridworld, point_mass_step, Gridworld, PointMassEnv};
use crate::latent::{
    compose, ActionDecoder, ContinuousLatent, FitConfig, GaussianDecoder, GaussianHead,
    LatentMap, LatentPolicy, StateRef, TabularDecoder,
};
use crate::mdp::{value_iteration, DistVector, TabularPolicy};
use crate::nn::Mlp;
use crate::reparam::{reparametrize_tabular, rows_from_counts, FactoredModel, TabularReparam};
use crate::report::{write_csv, Series};
use crate::rng::{cell_rng, sample_index, stream, stream_rng};
use crate::theory::{
    instances, optimal_decoder, tabular_latent_bc, theorem1_report, theorem2_sweep,
    theorem3_report, uniform_joint, BoundReport, LinearReport, SweepRow,
};
use crate::{Error, Result};

pub const OFFLINE_FILE: &str = "offline.jsonl";
pub const EXPERT_FILE: &str = "expert.jsonl";

/// What a stage wrote: the command, the hashed config that produced it, and
/// the artifact paths relative to the run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub artifacts: BTreeMap<String, String>,
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    hash: String,
    config: serde_json::Value,
    artifacts: &[(&str, String)],
) -> Result<Manifest> {
    let manifest = Manifest {
        command: command.to_string(),
        seed,
        config_sha256: hash,
        config,
        artifacts: artifacts.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    };
    let path = out.join(format!("{command}-manifest.json"));
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn experiment_manifest(
    cfg: &ExperimentConfig,
    command: &str,
    artifacts: &[(&str, String)],
) -> Result<Manifest> {
    write_manifest(
        &cfg.out,
        command,
        cfg.seed,
        config_hash(cfg),
        serde_json::to_value(cfg)?,
        artifacts,
    )
}

/// The configured environment, built.
pub enum BuiltEnv {
    Grid(Box<Gridworld>),
    PointMass { env: PointMassEnv, spec: PointMassSpec },
}

pub fn build_env(cfg: &ExperimentConfig) -> Result<BuiltEnv> {
    match &cfg.environment {
        EnvSpec::Gridworld(spec) => Ok(BuiltEnv::Grid(Box::new(build_redundant_gridworld(spec)?))),
        EnvSpec::PointMass(pm) => Ok(BuiltEnv::PointMass {
            env: PointMassEnv::new(pm.action_dim, pm.dt, pm.noise_std, pm.bound, cfg.seed)?,
            spec: pm.clone(),
        }),
    }
}

fn grid_env(cfg: &ExperimentConfig) -> Result<Box<Gridworld>> {
    match build_env(cfg)? {
        BuiltEnv::Grid(gw) => Ok(gw),
        BuiltEnv::PointMass { .. } => Err(Error::Config {
            field: "environment".into(),
            msg: "this stage needs the tabular gridworld".into(),
        }),
    }
}

/// The demonstrator: greedy optimal policy, optionally mixed with uniform
/// noise (`epsilon` > 0 makes it stochastic, hence clonable at a √-rate).
pub fn grid_expert(gw: &Gridworld, epsilon: f64) -> Result<TabularPolicy> {
    let greedy = value_iteration(&gw.mdp, &gw.reward, 1e-10)?;
    Ok(if epsilon > 0.0 { greedy.soften(epsilon) } else { greedy })
}

// ---------------------------------------------------------------------------
// gen-data

/// Generate the offline and expert datasets and write them as JSONL.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let offline_path = cfg.out.join(OFFLINE_FILE);
    let expert_path = cfg.out.join(EXPERT_FILE);
    match build_env(cfg)? {
        BuiltEnv::Grid(gw) => {
            let d_off = DistVector::uniform(gw.mdp.n_states());
            let offline = generate_offline(&gw.mdp, &d_off, cfg.data.m, cfg.seed)?;
            let expert_pi = grid_expert(&gw, cfg.data.expert_epsilon)?;
            let expert = generate_expert(&gw.mdp, &expert_pi, cfg.data.n, cfg.seed)?;
            crate::data::save_offline(&offline_path, &offline)?;
            crate::data::save_expert(&expert_path, &expert)?;
        }
        BuiltEnv::PointMass { env, spec } => {
            let offline = generate_offline_pointmass(&env, cfg.data.m, cfg.seed)?;
            let expert =
                generate_expert_pointmass(&env, spec.target, spec.gamma, cfg.data.n, cfg.seed)?;
            crate::data::save_offline(&offline_path, &offline)?;
            crate::data::save_expert(&expert_path, &expert)?;
        }
    }
    experiment_manifest(
        cfg,
        "gen-data",
        &[("offline", OFFLINE_FILE.into()), ("expert", EXPERT_FILE.into())],
    )
}

fn load_run_offline(cfg: &ExperimentConfig) -> Result<OfflineDataset> {
    let bounds = match build_env(cfg)? {
        BuiltEnv::Grid(gw) => Some((gw.mdp.n_states(), gw.mdp.n_actions())),
        BuiltEnv::PointMass { .. } => None,
    };
    load_offline(cfg.out.join(OFFLINE_FILE), bounds)
}

fn load_run_expert(cfg: &ExperimentConfig) -> Result<ExpertDataset> {
    let bounds = match build_env(cfg)? {
        BuiltEnv::Grid(gw) => Some((gw.mdp.n_states(), gw.mdp.n_actions())),
        BuiltEnv::PointMass { .. } => None,
    };
    load_expert(cfg.out.join(EXPERT_FILE), bounds)
}

// ---------------------------------------------------------------------------
// pretrain

/// JSON sidecar written next to binary checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub method: Method,
    pub embed_dim: usize,
    pub pair_dim: usize,
    pub next_dim: usize,
    pub joint_phi: bool,
    pub finetune_decoder: bool,
    pub rff_dim: Option<usize>,
    pub rff_seed: Option<u64>,
}

/// Checkpoint of the exact tabular reparametrization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactoredCheckpoint {
    pub table: Vec<Vec<usize>>,
    pub n_latent: usize,
    pub latent_rows: Vec<Vec<Vec<f64>>>,
    pub objective: f64,
    pub medoids: Vec<Vec<usize>>,
}

fn one_hot(i: usize, n: usize) -> Vec<f64> {
    assert!(i < n);
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// One-hot featurization of tabular triples for the encoders:
/// pair = `onehot(s) ++ onehot(a)`, next = `onehot(s')`.
pub fn tabular_features(
    triples: &[(usize, usize, usize)],
    n_states: usize,
    n_actions: usize,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    triples
        .iter()
        .map(|&(s, a, sp)| {
            let mut pair = one_hot(s, n_states);
            pair.extend_from_slice(&one_hot(a, n_actions));
            (pair, one_hot(sp, n_states))
        })
        .collect()
}

fn continuous_features(triples: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> Vec<(Vec<f64>, Vec<f64>)> {
    triples
        .iter()
        .map(|(s, a, sp)| {
            let mut pair = s.clone();
            pair.extend_from_slice(a);
            (pair, sp.clone())
        })
        .collect()
}

fn offline_features(cfg: &ExperimentConfig, offline: &OfflineDataset) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    match &offline.data {
        OfflineData::Tabular(triples) => {
            let gw = grid_env(cfg)?;
            Ok(tabular_features(triples, gw.mdp.n_states(), gw.mdp.n_actions()))
        }
        OfflineData::Continuous(triples) => Ok(continuous_features(triples)),
    }
}

fn ebm_config(cfg: &ExperimentConfig) -> EbmConfig {
    EbmConfig {
        embed_dim: cfg.model.embed_dim,
        hidden: cfg.model.hidden.clone(),
        steps: cfg.model.steps,
        batch_size: cfg.model.batch,
        negatives: if cfg.model.negatives == 0 {
            NegativeMode::InBatch
        } else {
            NegativeMode::Sampled { count: cfg.model.negatives }
        },
        lr: cfg.model.lr,
        seed: cfg.seed,
    }
}

/// Fit the factored transition model on the offline dataset and write its
/// checkpoint: exact per-state clustering for `trail-tabular`, a contrastive
/// encoder pair for `trail-ebm` and `trail-linear` (the latter additionally
/// records the frozen random-feature map's seed).
pub fn pretrain(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    if cfg.method == Method::Bc {
        return Err(Error::Config {
            field: "method".into(),
            msg: "bc has no pretraining stage; run imitate directly".into(),
        });
    }
    let dir = cfg.out.join("pretrain");
    fs::create_dir_all(&dir)?;
    let offline = load_run_offline(cfg)?;
    match cfg.method {
        Method::TrailTabular => {
            let gw = grid_env(cfg)?;
            let (n_states, n_actions) = (gw.mdp.n_states(), gw.mdp.n_actions());
            let counts = offline.transition_counts(n_states, n_actions)?;
            let rows = rows_from_counts(&counts);
            let weights = offline.pair_counts(n_states, n_actions)?;
            let rp = reparametrize_tabular(&rows, cfg.model.n_latent, Some(&weights))?;
            let ckpt = FactoredCheckpoint {
                table: rp.model.phi.table().to_vec(),
                n_latent: rp.model.phi.n_latent(),
                latent_rows: rp.model.latent_rows,
                objective: rp.objective,
                medoids: rp.medoids,
            };
            fs::write(dir.join("factored.json"), serde_json::to_string_pretty(&ckpt)?)?;
            experiment_manifest(cfg, "pretrain", &[("factored", "pretrain/factored.json".into())])
        }
        Method::TrailEbm | Method::TrailLinear => {
            let features = offline_features(cfg, &offline)?;
            let (model, log) = train_transition_ebm(&features, &ebm_config(cfg))?;
            model.phi.save(&dir.join("phi.bin"))?;
            model.psi.save(&dir.join("psi.bin"))?;
            let log_rows: Vec<Vec<String>> =
                log.iter().map(|(s, l)| vec![s.to_string(), format!("{l:.6}")]).collect();
            write_csv(dir.join("train-log.csv"), &["step", "loss"], &log_rows)?;
            let (rff_dim, rff_seed) = if cfg.method == Method::TrailLinear {
                (Some(cfg.model.rff_dim), Some(stream_rng(cfg.seed, stream::RFF).gen::<u64>()))
            } else {
                (None, None)
            };
            let meta = CheckpointMeta {
                method: cfg.method,
                embed_dim: cfg.model.embed_dim,
                pair_dim: model.phi.input_dim(),
                next_dim: model.psi.input_dim(),
                joint_phi: cfg.model.joint_phi,
                finetune_decoder: cfg.model.finetune_decoder,
                rff_dim,
                rff_seed,
            };
            fs::write(dir.join("checkpoint.json"), serde_json::to_string_pretty(&meta)?)?;
            experiment_manifest(
                cfg,
                "pretrain",
                &[
                    ("phi", "pretrain/phi.bin".into()),
                    ("psi", "pretrain/psi.bin".into()),
                    ("checkpoint", "pretrain/checkpoint.json".into()),
                    ("train_log", "pretrain/train-log.csv".into()),
                ],
            )
        }
        Method::Bc => unreachable!("rejected above"),
    }
}

/// A pretrained transition model, reloaded from its checkpoint.
pub enum Pretrained {
    Factored(TabularReparam),
    Ebm { model: EnergyModel, meta: CheckpointMeta },
    Linear { model: EnergyModel, rff: RffMap, meta: CheckpointMeta },
}

/// Reload the pretraining checkpoint for this config, verifying that the
/// sidecar agrees with the binary shapes and the configured method.
pub fn load_pretrained(cfg: &ExperimentConfig) -> Result<Pretrained> {
    let dir = cfg.out.join("pretrain");
    match cfg.method {
        Method::Bc => Err(Error::Config {
            field: "method".into(),
            msg: "bc has no pretraining checkpoint".into(),
        }),
        Method::TrailTabular => {
            let text = fs::read_to_string(dir.join("factored.json"))?;
            let ckpt: FactoredCheckpoint = serde_json::from_str(&text)?;
            let phi = LatentMap::new(ckpt.table, ckpt.n_latent)?;
            Ok(Pretrained::Factored(TabularReparam {
                model: FactoredModel { phi, latent_rows: ckpt.latent_rows },
                objective: ckpt.objective,
                medoids: ckpt.medoids,
            }))
        }
        Method::TrailEbm | Method::TrailLinear => {
            let text = fs::read_to_string(dir.join("checkpoint.json"))?;
            let meta: CheckpointMeta = serde_json::from_str(&text)?;
            if meta.method != cfg.method {
                return Err(Error::Checkpoint(format!(
                    "checkpoint was pretrained with {}, config asks for {}",
                    meta.method.name(),
                    cfg.method.name()
                )));
            }
            let phi = Mlp::load(&dir.join("phi.bin"))?;
            let psi = Mlp::load(&dir.join("psi.bin"))?;
            if phi.output_dim() != meta.embed_dim
                || psi.output_dim() != meta.embed_dim
                || phi.input_dim() != meta.pair_dim
                || psi.input_dim() != meta.next_dim
            {
                return Err(Error::Checkpoint(format!(
                    "sidecar says dims ({}, {}) → {}, binaries have ({}, {}) → ({}, {})",
                    meta.pair_dim,
                    meta.next_dim,
                    meta.embed_dim,
                    phi.input_dim(),
                    psi.input_dim(),
                    phi.output_dim(),
                    psi.output_dim()
                )));
            }
            let offline = load_run_offline(cfg)?;
            let pool: Vec<Vec<f64>> =
                offline_features(cfg, &offline)?.into_iter().map(|(_, next)| next).collect();
            let model = EnergyModel::from_parts(phi, psi, pool)?;
            if cfg.method == Method::TrailLinear {
                let (Some(rff_dim), Some(rff_seed)) = (meta.rff_dim, meta.rff_seed) else {
                    return Err(Error::Checkpoint(
                        "trail-linear checkpoint is missing the random-feature dims/seed".into(),
                    ));
                };
                let rff = RffMap::new(meta.embed_dim, rff_dim, rff_seed);
                Ok(Pretrained::Linear { model, rff, meta })
            } else {
                Ok(Pretrained::Ebm { model, meta })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// imitate

#[derive(Serialize, Deserialize)]
struct TabularPolicyFile {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ImitateMeta {
    kind: String,
    state_dim: usize,
    z_dim: usize,
    action_dim: usize,
}

/// Transition rows the pretrained model assigns to every `(s, a)`, used to
/// recover a latent grouping from the learned encoders: each row is the
/// model's next-state distribution over the one-hot state candidates.
pub fn model_rows(model: &Pretrained, gw: &Gridworld) -> Result<Vec<Vec<Vec<f64>>>> {
    let n_states = gw.mdp.n_states();
    let n_actions = gw.mdp.n_actions();
    let candidates: Vec<Vec<f64>> = (0..n_states).map(|sp| one_hot(sp, n_states)).collect();
    match model {
        Pretrained::Factored(rp) => Ok(rp.model.dense()),
        Pretrained::Ebm { model, .. } => Ok((0..n_states)
            .map(|s| {
                (0..n_actions)
                    .map(|a| {
                        let mut pair = one_hot(s, n_states);
                        pair.extend_from_slice(&one_hot(a, n_actions));
                        model.candidate_dist(&pair, &candidates)
                    })
                    .collect()
            })
            .collect()),
        Pretrained::Linear { model, rff, .. } => {
            let next_embeds: Vec<Vec<f64>> =
                candidates.iter().map(|c| model.psi.forward(c)).collect();
            Ok((0..n_states)
                .map(|s| {
                    (0..n_actions)
                        .map(|a| {
                            let mut pair = one_hot(s, n_states);
                            pair.extend_from_slice(&one_hot(a, n_actions));
                            crate::ebm::linear_candidate_dist(
                                rff,
                                &model.phi.forward(&pair),
                                &next_embeds,
                            )
                        })
                        .collect()
                })
                .collect())
        }
    }
}

/// Replace the offline joint counts with expert counts inside every latent
/// group the expert touches, so the decoder prefers demonstrated actions.
fn finetuned_joint(
    offline_joint: &[Vec<f64>],
    expert: &ExpertDataset,
    phi: &LatentMap,
) -> Result<Vec<Vec<f64>>> {
    let mut joint = offline_joint.to_vec();
    let mut exp_counts = vec![vec![0.0f64; phi.n_actions()]; phi.n_states()];
    for (i, &(s, a)) in expert.tabular()?.iter().enumerate() {
        if s >= phi.n_states() || a >= phi.n_actions() {
            return Err(Error::DataFormat {
                line: i + 1,
                msg: format!("expert pair ({s}, {a}) outside the latent map's table"),
            });
        }
        exp_counts[s][a] += 1.0;
    }
    for s in 0..phi.n_states() {
        for group in phi.groups(s) {
            if group.iter().any(|&a| exp_counts[s][a] > 0.0) {
                for &a in &group {
                    joint[s][a] = exp_counts[s][a];
                }
            }
        }
    }
    Ok(joint)
}

/// Fit the policy: vanilla BC directly on actions, or the latent pipeline
/// (decoder from offline data, behavioral cloning in latent space, exact
/// composition). Writes the fitted policy artifacts.
pub fn imitate(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = cfg.out.join("imitate");
    fs::create_dir_all(&dir)?;
    let expert = load_run_expert(cfg)?;
    match build_env(cfg)? {
        BuiltEnv::Grid(gw) => imitate_grid(cfg, &gw, &expert, &dir),
        BuiltEnv::PointMass { .. } => imitate_pointmass(cfg, &expert, &dir),
    }
}

fn save_policy_json(path: &Path, rows: Vec<Vec<f64>>) -> Result<()> {
    fs::write(path, serde_json::to_string(&TabularPolicyFile { rows })?)?;
    Ok(())
}

fn imitate_grid(
    cfg: &ExperimentConfig,
    gw: &Gridworld,
    expert: &ExpertDataset,
    dir: &Path,
) -> Result<Manifest> {
    let (n_states, n_actions) = (gw.mdp.n_states(), gw.mdp.n_actions());
    if cfg.method == Method::Bc {
        let policy = tabular_bc(expert, n_states, n_actions)?;
        save_policy_json(&dir.join("policy.json"), policy.rows().to_vec())?;
        return experiment_manifest(cfg, "imitate", &[("policy", "imitate/policy.json".into())]);
    }
    let pretrained = load_pretrained(cfg)?;
    let phi = match &pretrained {
        Pretrained::Factored(rp) => rp.model.phi.clone(),
        _ => {
            // Learned encoders: recover a grouping by clustering the model's
            // own transition rows, exactly as the tabular path clusters
            // empirical rows.
            let rows = model_rows(&pretrained, gw)?;
            let offline = load_run_offline(cfg)?;
            let weights = offline.pair_counts(n_states, n_actions)?;
            reparametrize_tabular(&rows, cfg.model.n_latent, Some(&weights))?.model.phi
        }
    };
    let offline = load_run_offline(cfg)?;
    let mut joint = offline.pair_counts(n_states, n_actions)?;
    if cfg.model.finetune_decoder {
        joint = finetuned_joint(&joint, expert, &phi)?;
    }
    let decoder = TabularDecoder::from_joint(&joint, &phi)?;
    let latent = tabular_latent_bc(expert, &phi)?;
    let composed = compose(&decoder, &latent)?;
    save_policy_json(&dir.join("policy.json"), composed.rows().to_vec())?;
    fs::write(
        dir.join("phi.json"),
        serde_json::to_string(&serde_json::json!({
            "table": phi.table(),
            "n_latent": phi.n_latent(),
        }))?,
    )?;
    fs::write(
        dir.join("latent.json"),
        serde_json::to_string(&(0..n_states).map(|s| latent.row(s).to_vec()).collect::<Vec<_>>())?,
    )?;
    let decoder_rows: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|s| (0..phi.n_latent()).map(|z| decoder.row(s, z).to_vec()).collect())
        .collect();
    fs::write(dir.join("decoder.json"), serde_json::to_string(&decoder_rows)?)?;
    experiment_manifest(
        cfg,
        "imitate",
        &[
            ("policy", "imitate/policy.json".into()),
            ("phi", "imitate/phi.json".into()),
            ("latent", "imitate/latent.json".into()),
            ("decoder", "imitate/decoder.json".into()),
        ],
    )
}

fn imitate_pointmass(
    cfg: &ExperimentConfig,
    expert: &ExpertDataset,
    dir: &Path,
) -> Result<Manifest> {
    let pairs = expert.continuous()?;
    let state_dim = pairs[0].0.len();
    let action_dim = pairs[0].1.len();
    let fit = FitConfig {
        steps: cfg.model.steps,
        batch_size: cfg.model.batch,
        lr: cfg.model.lr,
        seed: cfg.seed,
    };
    if cfg.method == Method::Bc {
        let (head, _) = crate::baselines::gaussian_bc(expert, &cfg.model.hidden, &fit)?;
        head.net.save(&dir.join("policy.bin"))?;
        let meta = ImitateMeta { kind: "gaussian-bc".into(), state_dim, z_dim: 0, action_dim };
        fs::write(dir.join("imitate.json"), serde_json::to_string_pretty(&meta)?)?;
        return experiment_manifest(
            cfg,
            "imitate",
            &[("policy", "imitate/policy.bin".into()), ("meta", "imitate/imitate.json".into())],
        );
    }
    let pretrained = load_pretrained(cfg)?;
    let offline = load_run_offline(cfg)?;
    let triples = offline.continuous()?;
    // z = embed(s ++ a), through the frozen (or co-trained) encoder, with the
    // linear variant mapping embeddings through the frozen random features.
    let (mut phi_net, embed): (Mlp, Box<dyn Fn(&Mlp, &[f64]) -> Vec<f64> + Sync>) =
        match &pretrained {
            Pretrained::Ebm { model, .. } => {
                (model.phi.clone(), Box::new(|net: &Mlp, pair: &[f64]| net.forward(pair)))
            }
            Pretrained::Linear { model, rff, .. } => {
                let rff = rff.clone();
                (
                    model.phi.clone(),
                    Box::new(move |net: &Mlp, pair: &[f64]| rff.features(&net.forward(pair))),
                )
            }
            Pretrained::Factored(_) => unreachable!("tabular method rejected on this env"),
        };
    let z_dim = match &pretrained {
        Pretrained::Linear { rff, .. } => rff.n_features(),
        _ => cfg.model.embed_dim,
    };
    // Contrastive training pins the encoder down only up to scale and
    // offset, and raw embeddings can be orders of magnitude larger than the
    // Gaussian heads' initial outputs. Standardize each embedding dimension
    // over the offline set; the heads then both train and act in the same
    // normalized space, so nothing extra needs persisting.
    let (mu, sigma) = {
        let mut zs = Vec::with_capacity(triples.len());
        for (s, a, _) in triples {
            let mut pair = s.clone();
            pair.extend_from_slice(a);
            zs.push(embed(&phi_net, &pair));
        }
        embedding_moments(&zs)
    };
    let embed: Box<dyn Fn(&Mlp, &[f64]) -> Vec<f64> + Sync> = match &pretrained {
        // The encoder ends in a linear layer, so the affine correction folds
        // into its parameters — joint finetuning keeps working on the
        // reparametrized net.
        Pretrained::Ebm { .. } => {
            standardize_output(&mut phi_net, &mu, &sigma);
            embed
        }
        _ => Box::new(move |net: &Mlp, pair: &[f64]| {
            let mut z = embed(net, pair);
            for (j, v) in z.iter_mut().enumerate() {
                *v = (*v - mu[j]) / sigma[j];
            }
            z
        }),
    };
    let mut seeds = stream_rng(cfg.seed, stream::INIT);
    let dec_seed: u64 = seeds.gen();
    let lat_seed: u64 = seeds.gen();
    let mut decoder =
        GaussianDecoder::new(state_dim, z_dim, &cfg.model.hidden, action_dim, dec_seed);
    let joint_phi = cfg.model.joint_phi && matches!(pretrained, Pretrained::Ebm { .. });
    let dec_data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = match &pretrained {
        // The decoder consumes z = embed(pair); precompute unless gradients
        // must flow through the pair encoder.
        _ if joint_phi => triples
            .iter()
            .map(|(s, a, _)| {
                let mut pair = s.clone();
                pair.extend_from_slice(a);
                (s.clone(), pair, a.clone())
            })
            .collect(),
        _ => Vec::new(),
    };
    if joint_phi {
        crate::latent::train_gaussian_decoder(&dec_data, &mut phi_net, &mut decoder, &fit, true)?;
    } else {
        let frozen: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = triples
            .iter()
            .map(|(s, a, _)| {
                let mut pair = s.clone();
                pair.extend_from_slice(a);
                (s.clone(), embed(&phi_net, &pair), a.clone())
            })
            .collect();
        // An identity "encoder" feeds the precomputed z straight through.
        let mut identity = identity_net(z_dim);
        crate::latent::train_gaussian_decoder(&frozen, &mut identity, &mut decoder, &fit, false)?;
    }
    if cfg.model.finetune_decoder {
        let exp_data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = pairs
            .iter()
            .map(|(s, a)| {
                let mut pair = s.clone();
                pair.extend_from_slice(a);
                (s.clone(), embed(&phi_net, &pair), a.clone())
            })
            .collect();
        let mut identity = identity_net(z_dim);
        crate::latent::train_gaussian_decoder(&exp_data, &mut identity, &mut decoder, &fit, false)?;
    }
    let latent_data: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .iter()
        .map(|(s, a)| {
            let mut pair = s.clone();
            pair.extend_from_slice(a);
            (s.clone(), embed(&phi_net, &pair))
        })
        .collect();
    let mut latent_head = GaussianHead::new(state_dim, &cfg.model.hidden, z_dim, lat_seed);
    crate::latent::train_gaussian_latent(&latent_data, &mut latent_head, &fit)?;
    latent_head.net.save(&dir.join("latent.bin"))?;
    decoder.head.net.save(&dir.join("decoder.bin"))?;
    let meta = ImitateMeta { kind: "gaussian".into(), state_dim, z_dim, action_dim };
    fs::write(dir.join("imitate.json"), serde_json::to_string_pretty(&meta)?)?;
    experiment_manifest(
        cfg,
        "imitate",
        &[
            ("latent", "imitate/latent.bin".into()),
            ("decoder", "imitate/decoder.bin".into()),
            ("meta", "imitate/imitate.json".into()),
        ],
    )
}

/// Per-dimension mean and standard deviation of a set of embeddings, the
/// deviation floored away from zero so constant dimensions normalize to 0.
fn embedding_moments(zs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!zs.is_empty());
    let dim = zs[0].len();
    let n = zs.len() as f64;
    let mut mu = vec![0.0; dim];
    for z in zs {
        for (m, v) in mu.iter_mut().zip(z) {
            *m += v / n;
        }
    }
    let mut sigma = vec![0.0; dim];
    for z in zs {
        for (s, (v, m)) in sigma.iter_mut().zip(z.iter().zip(&mu)) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in sigma.iter_mut() {
        *s = s.sqrt().max(1e-6);
    }
    (mu, sigma)
}

/// Rescale the final (linear) layer of `net` so its output becomes
/// `(y − mu) / sigma` componentwise.
fn standardize_output(net: &mut Mlp, mu: &[f64], sigma: &[f64]) {
    let sizes = net.sizes().to_vec();
    let n_out = *sizes.last().unwrap();
    assert_eq!(mu.len(), n_out);
    assert_eq!(sigma.len(), n_out);
    let n_in = sizes[sizes.len() - 2];
    let mut w_off = 0;
    for l in 0..sizes.len() - 2 {
        w_off += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    let params = net.params_mut();
    for o in 0..n_out {
        for w in &mut params[w_off + o * n_in..w_off + (o + 1) * n_in] {
            *w /= sigma[o];
        }
        let b = &mut params[w_off + n_out * n_in + o];
        *b = (*b - mu[o]) / sigma[o];
    }
}

/// A single-layer net computing the identity on `dim` inputs, used to feed
/// precomputed latent features through the decoder trainer unchanged.
fn identity_net(dim: usize) -> Mlp {
    let mut net = Mlp::new(&[dim, dim], 0);
    let params = net.params_mut();
    for p in params.iter_mut() {
        *p = 0.0;
    }
    for i in 0..dim {
        params[i * dim + i] = 1.0;
    }
    net
}

// ---------------------------------------------------------------------------
// eval

/// A fitted policy reloaded for evaluation.
pub enum RunPolicy {
    Tabular(TabularPolicy),
    Composed { latent: LatentPolicy, decoder: ActionDecoder },
    GaussianBc(GaussianHead),
}

/// Reload the policy artifacts written by [`imitate`].
pub fn load_policy(cfg: &ExperimentConfig) -> Result<RunPolicy> {
    let dir = cfg.out.join("imitate");
    match build_env(cfg)? {
        BuiltEnv::Grid(_) => {
            let text = fs::read_to_string(dir.join("policy.json"))?;
            let file: TabularPolicyFile = serde_json::from_str(&text)?;
            Ok(RunPolicy::Tabular(TabularPolicy::new(file.rows)?))
        }
        BuiltEnv::PointMass { .. } => {
            let text = fs::read_to_string(dir.join("imitate.json"))?;
            let meta: ImitateMeta = serde_json::from_str(&text)?;
            match meta.kind.as_str() {
                "gaussian-bc" => {
                    let head = GaussianHead::wrap(Mlp::load(&dir.join("policy.bin"))?)?;
                    Ok(RunPolicy::GaussianBc(head))
                }
                "gaussian" => {
                    let latent = GaussianHead::wrap(Mlp::load(&dir.join("latent.bin"))?)?;
                    let decoder = GaussianDecoder::from_net(
                        Mlp::load(&dir.join("decoder.bin"))?,
                        meta.state_dim,
                    )?;
                    Ok(RunPolicy::Composed {
                        latent: LatentPolicy::Continuous(ContinuousLatent::Gaussian(latent)),
                        decoder: ActionDecoder::Gaussian(decoder),
                    })
                }
                other => Err(Error::Checkpoint(format!("unknown policy kind {other:?}"))),
            }
        }
    }
}

/// Per-seed evaluation statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedStats {
    pub seed_index: usize,
    pub success_rate: f64,
    pub mean_return: f64,
}

/// Evaluation report: success and return, mean ± standard error over seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub episodes: usize,
    pub eval_seeds: usize,
    pub per_seed: Vec<SeedStats>,
    pub success_mean: f64,
    pub success_stderr: f64,
    pub return_mean: f64,
    pub return_stderr: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn summarize(method: &str, episodes: usize, per_seed: Vec<SeedStats>) -> EvalSummary {
    let succ: Vec<f64> = per_seed.iter().map(|s| s.success_rate).collect();
    let ret: Vec<f64> = per_seed.iter().map(|s| s.mean_return).collect();
    let (success_mean, success_stderr) = mean_stderr(&succ);
    let (return_mean, return_stderr) = mean_stderr(&ret);
    EvalSummary {
        method: method.to_string(),
        episodes,
        eval_seeds: per_seed.len(),
        per_seed,
        success_mean,
        success_stderr,
        return_mean,
        return_stderr,
    }
}

/// Roll out a tabular policy on the gridworld for `eval_seeds` independent
/// seeds of `episodes` episodes each. Success means reaching the goal within
/// `max_steps`; the return is the truncated discounted reward sum.
pub fn eval_tabular(
    gw: &Gridworld,
    policy: &TabularPolicy,
    method: &str,
    episodes: usize,
    eval_seeds: usize,
    max_steps: usize,
    seed: u64,
) -> EvalSummary {
    assert!(episodes > 0 && eval_seeds > 0 && max_steps > 0);
    let gamma = gw.spec.gamma;
    let per_seed: Vec<SeedStats> = (0..eval_seeds)
        .into_par_iter()
        .map(|seed_index| {
            let mut rng = cell_rng(seed, stream::EVAL, seed_index as u64);
            let mut successes = 0usize;
            let mut returns = 0.0;
            for _ in 0..episodes {
                let mut s = sample_index(gw.mdp.initial(), &mut rng);
                let mut disc = 1.0;
                let mut ret = 0.0;
                let mut reached = false;
                for _ in 0..max_steps {
                    if s == gw.goal_state {
                        reached = true;
                        ret += disc;
                    }
                    let a = sample_index(policy.row(s), &mut rng);
                    s = sample_index(gw.mdp.row(s, a), &mut rng);
                    disc *= gamma;
                }
                successes += reached as usize;
                returns += ret;
            }
            SeedStats {
                seed_index,
                success_rate: successes as f64 / episodes as f64,
                mean_return: returns / episodes as f64,
            }
        })
        .collect();
    summarize(method, episodes, per_seed)
}

/// Roll out a continuous policy on the point-mass arena. Success means
/// passing within `0.2 · bound` of the target; the return is the negative
/// closest approach, normalized by the arena bound.
pub fn eval_pointmass(
    env: &PointMassEnv,
    target: [f64; 2],
    policy: &RunPolicy,
    method: &str,
    episodes: usize,
    eval_seeds: usize,
    max_steps: usize,
    seed: u64,
) -> Result<EvalSummary> {
    assert!(episodes > 0 && eval_seeds > 0 && max_steps > 0);
    let per_seed: Vec<SeedStats> = (0..eval_seeds)
        .into_par_iter()
        .map(|seed_index| {
            let mut rng = cell_rng(seed, stream::EVAL, seed_index as u64);
            let mut successes = 0usize;
            let mut returns = 0.0;
            for _ in 0..episodes {
                let mut s = [
                    (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
                    (rng.gen::<f64>() * 2.0 - 1.0) * env.bound,
                ];
                let mut closest = f64::INFINITY;
                for _ in 0..max_steps {
                    let dist =
                        ((s[0] - target[0]).powi(2) + (s[1] - target[1]).powi(2)).sqrt();
                    closest = closest.min(dist);
                    let a = match policy {
                        RunPolicy::GaussianBc(head) => head.sample(&s, &mut rng),
                        RunPolicy::Composed { latent, decoder } => {
                            match crate::latent::infer_action(
                                StateRef::Features(&s),
                                latent,
                                decoder,
                                &mut rng,
                            )? {
                                crate::latent::ActionSample::Vector(a) => a,
                                crate::latent::ActionSample::Index(_) => {
                                    return Err(Error::ModeMismatch(
                                        "tabular action in a continuous rollout".into(),
                                    ))
                                }
                            }
                        }
                        RunPolicy::Tabular(_) => {
                            return Err(Error::ModeMismatch(
                                "tabular policy in a continuous rollout".into(),
                            ))
                        }
                    };
                    s = point_mass_step(env, s, &a, &mut rng);
                }
                successes += (closest <= 0.2 * env.bound) as usize;
                returns += -closest / env.bound;
            }
            Ok(SeedStats {
                seed_index,
                success_rate: successes as f64 / episodes as f64,
                mean_return: returns / episodes as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize(method, episodes, per_seed))
}

/// Evaluate the fitted policy and write `eval.json` / `eval.csv`.
pub fn eval(cfg: &ExperimentConfig) -> Result<(EvalSummary, Manifest)> {
    cfg.validate()?;
    let policy = load_policy(cfg)?;
    let e = &cfg.eval;
    let summary = match build_env(cfg)? {
        BuiltEnv::Grid(gw) => {
            let RunPolicy::Tabular(pi) = &policy else {
                return Err(Error::ModeMismatch("gridworld evaluation needs a tabular policy".into()));
            };
            eval_tabular(
                &gw,
                pi,
                cfg.method.name(),
                e.episodes,
                e.eval_seeds,
                e.max_steps,
                cfg.seed,
            )
        }
        BuiltEnv::PointMass { env, spec } => eval_pointmass(
            &env,
            spec.target,
            &policy,
            cfg.method.name(),
            e.episodes,
            e.eval_seeds,
            e.max_steps,
            cfg.seed,
        )?,
    };
    fs::write(cfg.out.join("eval.json"), serde_json::to_string_pretty(&summary)?)?;
    let rows: Vec<Vec<String>> = summary
        .per_seed
        .iter()
        .map(|s| {
            vec![
                summary.method.clone(),
                s.seed_index.to_string(),
                format!("{:.6}", s.success_rate),
                format!("{:.6}", s.mean_return),
            ]
        })
        .collect();
    write_csv(
        cfg.out.join("eval.csv"),
        &["method", "seed", "success_rate", "mean_return"],
        &rows,
    )?;
    let manifest = experiment_manifest(
        cfg,
        "eval",
        &[("summary", "eval.json".into()), ("table", "eval.csv".into())],
    )?;
    Ok((summary, manifest))
}

// ---------------------------------------------------------------------------
// verify-bound

/// Arguments of the standalone bound-verification command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    pub instances: usize,
    pub seed: u64,
}

/// Everything `verify-bound` writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub theorem1: Vec<BoundReport>,
    pub theorem3: Vec<LinearReport>,
    pub violations: usize,
}

/// Exact composed-policy bound on a batch of random tabular instances
/// (|S| ≤ 10, |A| ≤ 6, |Z| ≤ 4, γ alternating between 0.5 and 0.9).
pub fn theorem1_batch(instances_count: usize, seed: u64) -> Result<Vec<BoundReport>> {
    (0..instances_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = cell_rng(seed, stream::INSTANCE_GEN, i as u64);
            let n_states = rng.gen_range(2..=10);
            let n_actions = rng.gen_range(2..=6);
            let n_latent = rng.gen_range(1..=4);
            let gamma = if i % 2 == 0 { 0.5 } else { 0.9 };
            let mdp = instances::random_mdp(n_states, n_actions, gamma, &mut rng);
            let pi_star = instances::random_full_support_policy(n_states, n_actions, &mut rng);
            let d_off = instances::random_offline_dist(n_states, &mut rng);
            let phi = instances::random_latent_map(n_states, n_actions, n_latent, &mut rng);
            let t_z = instances::random_latent_rows(n_states, n_latent, n_states, &mut rng);
            let decoder = instances::random_decoder(n_states, n_latent, n_actions, &mut rng);
            let latent = instances::random_realized_latent(&phi, &mut rng);
            theorem1_report(&mdp, &pi_star, &d_off, &phi, &t_z, &decoder, &latent)
        })
        .collect()
}

/// Exact linear-model bound on a batch of random exact-linear MDPs
/// (|S| ≤ 8, |A| ≤ 6, d ≤ 4) with random simplex θ and optimal decoders.
pub fn theorem3_batch(instances_count: usize, seed: u64) -> Result<Vec<LinearReport>> {
    (0..instances_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = cell_rng(seed, stream::INSTANCE_GEN, (1 << 20) + i as u64);
            let n_states = rng.gen_range(2..=8);
            let n_actions = rng.gen_range(2..=6);
            let d = rng.gen_range(1..=4);
            let gamma = if i % 2 == 0 { 0.5 } else { 0.9 };
            let ds_seed: u64 = rng.gen();
            let (mdp, spec) = crate::theory::build_linear_mdp(n_states, n_actions, d, gamma, ds_seed)?;
            let pi_star = instances::random_full_support_policy(n_states, n_actions, &mut rng);
            let d_off = instances::random_offline_dist(n_states, &mut rng);
            let theta = instances::random_simplex_theta(n_states, d, &mut rng);
            let phi_map = crate::theory::embedding_latent_map(&spec)?;
            let decoder = optimal_decoder(&uniform_joint(&d_off, n_actions), &phi_map)?;
            theorem3_report(&spec, &mdp, &pi_star, &d_off, &theta, &decoder)
        })
        .collect()
}

/// Run both bound batches, write the JSON report, and fail with a bound
/// violation (exit code 3) if any instance does not hold.
pub fn verify_bound(args: &VerifyArgs, out: &Path) -> Result<VerifyReport> {
    if args.instances == 0 {
        return Err(Error::Config {
            field: "instances".into(),
            msg: "need at least one instance".into(),
        });
    }
    fs::create_dir_all(out)?;
    let theorem1 = theorem1_batch(args.instances, args.seed)?;
    let theorem3 = theorem3_batch(args.instances, args.seed)?;
    let violations = theorem1.iter().filter(|r| !r.holds).count()
        + theorem3.iter().filter(|r| !r.holds).count();
    let report = VerifyReport { theorem1, theorem3, violations };
    fs::write(out.join("verify-bound.json"), serde_json::to_string_pretty(&report)?)?;
    let json = serde_json::to_string(args)?;
    let hash = format!("{:x}", Sha256::digest(json.as_bytes()));
    write_manifest(
        out,
        "verify-bound",
        args.seed,
        hash,
        serde_json::to_value(args)?,
        &[("report", "verify-bound.json".into())],
    )?;
    if report.violations > 0 {
        return Err(Error::BoundViolation(format!(
            "{} of {} instances violated the bound; see {}",
            report.violations,
            2 * args.instances,
            out.join("verify-bound.json").display()
        )));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// sweep

/// Results of the estimation-rate sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub log_log_slope: Option<f64>,
}

/// Sweep expert dataset sizes on the configured gridworld with the exact
/// ground-truth factorization: at every `n`, the mean visitation gap over
/// fresh datasets must stay under the finite-sample bound (exit code 3
/// otherwise). Writes `sweep.csv` and `sweep.json`.
pub fn sweep(
    cfg: &ExperimentConfig,
    n_grid: &[usize],
    resamples: usize,
) -> Result<(SweepReport, Manifest)> {
    cfg.validate()?;
    let gw = grid_env(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    let expert = grid_expert(&gw, cfg.data.expert_epsilon)?;
    let d_off = DistVector::uniform(gw.mdp.n_states());
    let t_z = gw.ground_truth_t_z();
    let decoder = optimal_decoder(&uniform_joint(&d_off, gw.mdp.n_actions()), &gw.phi_star)?;
    let rows = theorem2_sweep(
        &gw.mdp,
        &expert,
        &d_off,
        &gw.phi_star,
        &t_z,
        &decoder,
        n_grid,
        resamples,
        cfg.seed,
    )?;
    let log_log_slope = crate::theory::log_log_slope(&rows).ok();
    let report = SweepReport { rows, log_log_slope };
    // Scientific notation: fixed-point would round sub-1e-8 gaps to zero.
    let csv_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), format!("{:.8e}", r.mean_diff), format!("{:.8e}", r.bound)])
        .collect();
    write_csv(cfg.out.join("sweep.csv"), &["n", "mean_diff", "bound"], &csv_rows)?;
    fs::write(cfg.out.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    let manifest = experiment_manifest(
        cfg,
        "sweep",
        &[("table", "sweep.csv".into()), ("report", "sweep.json".into())],
    )?;
    Ok((report, manifest))
}

// ---------------------------------------------------------------------------
// report

fn walk(dir: &Path, depth: usize, found: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            if depth > 0 {
                walk(&path, depth - 1, found)?;
            }
        } else {
            found.push(path);
        }
    }
    Ok(())
}

fn parse_cell(path: &Path, line: usize, cell: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| Error::DataFormat {
        line,
        msg: format!("{}: {cell:?} is not a number", path.display()),
    })
}

/// Aggregate the CSV artifacts under `dir` into standalone SVG charts:
/// a log-log rate chart per `sweep.csv`, a loss curve per `train-log.csv`,
/// and one success bar chart pooling every `eval.csv` by method. Returns the
/// charts written.
pub fn report(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    walk(dir, 3, &mut files)?;
    let mut written = Vec::new();
    let mut eval_stats: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for path in &files {
        match path.file_name().and_then(|n| n.to_str()) {
            Some("sweep.csv") => {
                let (_, rows) = crate::report::read_csv(path)?;
                let mut mean = Vec::new();
                let mut bound = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    let n = parse_cell(path, i + 2, &row[0])?;
                    mean.push((n, parse_cell(path, i + 2, &row[1])?));
                    bound.push((n, parse_cell(path, i + 2, &row[2])?));
                }
                // A gap of exactly zero (deterministic expert, large n) has
                // no place on a log axis; drop those points rather than the
                // whole report, and skip the chart if nothing is left to draw.
                mean.retain(|&(_, y)| y > 0.0);
                bound.retain(|&(_, y)| y > 0.0);
                if mean.len() < 2 || bound.is_empty() {
                    continue;
                }
                let svg = path.with_file_name("sweep.svg");
                crate::report::line_chart(
                    &svg,
                    "estimation rate",
                    "expert samples n",
                    "visitation gap",
                    &[
                        Series { name: "mean".into(), points: mean },
                        Series { name: "bound".into(), points: bound },
                    ],
                    true,
                    true,
                )?;
                written.push(svg);
            }
            Some("train-log.csv") => {
                let (_, rows) = crate::report::read_csv(path)?;
                let mut pts = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    pts.push((
                        parse_cell(path, i + 2, &row[0])?,
                        parse_cell(path, i + 2, &row[1])?,
                    ));
                }
                let svg = path.with_file_name("loss.svg");
                crate::report::line_chart(
                    &svg,
                    "training loss",
                    "step",
                    "loss",
                    &[Series { name: "loss".into(), points: pts }],
                    false,
                    false,
                )?;
                written.push(svg);
            }
            Some("eval.csv") => {
                let (_, rows) = crate::report::read_csv(path)?;
                for (i, row) in rows.iter().enumerate() {
                    let rate = parse_cell(path, i + 2, &row[2])?;
                    eval_stats.entry(row[0].clone()).or_default().push(rate);
                }
            }
            _ => {}
        }
    }
    if !eval_stats.is_empty() {
        let bars: Vec<(String, f64, f64)> = eval_stats
            .into_iter()
            .map(|(method, rates)| {
                let (m, se) = mean_stderr(&rates);
                (method, m, se)
            })
            .collect();
        let svg = dir.join("eval.svg");
        crate::report::bar_chart(&svg, "goal-reaching success", "success rate", &bars)?;
        written.push(svg);
    }
    if written.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no sweep.csv, train-log.csv, or eval.csv under {}",
            dir.display()
        )));
    }
    Ok(written)
}
