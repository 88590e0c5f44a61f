//! File-level commands behind the `plantsne` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::cloud::{PointCloud, SemanticClass};
use crate::cluster::euclidean_cluster;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{read_cloud, write_cloud, write_embedding, write_kl_history, write_lines, ClassMap, CloudFormat};
use crate::metrics::{instance_report, semantic_report, InstanceReport, SemanticReport};
use crate::segment::{
    analyze, classify, fit_svm, instance_segment, training_samples, FeatureVector, SuperpointAnalysis,
    SvmModel,
};
use crate::svg::write_scatter_svg;
use crate::synth::{generate, PlantSpec};
use crate::tsne::embed;
use crate::voxel::voxel_downsample;

/// Environment variable holding the worker count for multi-file commands.
pub const THREADS_ENV: &str = "PLANTSNE_THREADS";

pub const SWEEP_PERPLEXITIES: [f64; 4] = [20.0, 30.0, 40.0, 50.0];
pub const SWEEP_D_E: [f64; 3] = [1.0, 2.0, 3.0];
pub const INSTANCE_PERPLEXITIES: [f64; 7] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];

/// Worker count from `PLANTSNE_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to `threads` scoped workers; output order follows input order.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = threads.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every item mapped"))
        .collect()
}

pub fn read_input(path: &Path, cfg: &PipelineConfig) -> Result<PointCloud> {
    read_cloud(path, cfg.format_for(path), &cfg.data.class_map)
}

/// Reads a file written by this tool (crate class ids).
pub fn read_output(path: &Path) -> Result<PointCloud> {
    read_cloud(path, CloudFormat::Pheno4dTxt, &ClassMap::default())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn context(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { .. } | Error::Config { .. } => e,
        other => Error::InvalidInput(format!("{}: {other}", path.display())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSummary {
    pub points: usize,
    pub embedded: usize,
    pub voxel_size: f64,
    pub clusters: usize,
    pub final_kl: f64,
    pub outputs: Vec<PathBuf>,
}

/// Downsample, embed, and write coordinates, KL trace, cluster ids and an SVG.
pub fn cmd_embed(input: &Path, cfg: &PipelineConfig, prefix: &Path) -> Result<EmbedSummary> {
    let cloud = read_input(input, cfg)?;
    let low = voxel_downsample(&cloud, cfg.semantic.voxel).map_err(|e| context(input, e))?;
    let emb = embed(&low.cloud, &cfg.semantic.tsne).map_err(|e| context(input, e))?;
    let clusters = euclidean_cluster(&emb.y, cfg.semantic.cluster.d_e);
    let outputs = vec![
        with_suffix(prefix, ".downsampled.txt"),
        with_suffix(prefix, ".embedding.txt"),
        with_suffix(prefix, ".kl.txt"),
        with_suffix(prefix, ".clusters.txt"),
        with_suffix(prefix, ".svg"),
    ];
    write_cloud(&outputs[0], &low.cloud, None)?;
    write_embedding(&outputs[1], &emb.y)?;
    write_kl_history(&outputs[2], &emb.kl_history)?;
    write_lines(
        &outputs[3],
        std::iter::once(format!("cluster_count={}", clusters.count()))
            .chain(clusters.ids().iter().map(|c| c.to_string())),
    )?;
    write_scatter_svg(
        &outputs[4],
        &emb.y,
        clusters.ids(),
        &format!("{} perplexity {}", input.display(), cfg.semantic.tsne.perplexity),
    )?;
    Ok(EmbedSummary {
        points: cloud.len(),
        embedded: low.cloud.len(),
        voxel_size: low.voxel_size,
        clusters: clusters.count(),
        final_kl: emb.final_kl().unwrap_or(f64::NAN),
        outputs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointSummary {
    pub superpoints: usize,
    pub provenance: BTreeMap<&'static str, usize>,
    pub exhausted: bool,
    /// Fraction of points whose superpoint majority class matches their own; needs labels.
    pub purity: Option<f64>,
    pub outputs: Vec<PathBuf>,
}

/// Fraction of points agreeing with their superpoint's majority class.
pub fn superpoint_purity(ids: &[usize], gt: &[SemanticClass], count: usize) -> f64 {
    let mut votes = vec![[0usize; 2]; count];
    for (&s, &c) in ids.iter().zip(gt) {
        votes[s][c.id() as usize] += 1;
    }
    let agree: usize = votes.iter().map(|v| v[0].max(v[1])).sum();
    agree as f64 / ids.len().max(1) as f64
}

pub fn cmd_superpoints(input: &Path, cfg: &PipelineConfig, prefix: &Path) -> Result<SuperpointSummary> {
    let cloud = read_input(input, cfg)?;
    let a = analyze(&cloud, &cfg.semantic).map_err(|e| context(input, e))?;
    let outputs = vec![
        with_suffix(prefix, ".superpoints.txt"),
        with_suffix(prefix, ".superpoints.svg"),
    ];
    let lifted: Vec<u32> = a.lifted.iter().map(|&s| s as u32).collect();
    write_cloud(&outputs[0], &cloud, Some(&lifted))?;
    write_scatter_svg(
        &outputs[1],
        &a.embedding.y,
        a.superpoints.assignments(),
        &format!("{} superpoints", input.display()),
    )?;
    let mut provenance = BTreeMap::new();
    for p in a.superpoints.provenance() {
        *provenance.entry(p.name()).or_insert(0) += 1;
    }
    Ok(SuperpointSummary {
        superpoints: a.superpoints.count(),
        provenance,
        exhausted: a.superpoints.exhausted(),
        purity: cloud
            .semantic()
            .map(|gt| superpoint_purity(&a.lifted, gt, a.superpoints.count())),
        outputs,
    })
}

/// Analysis of one labeled training cloud.
struct Labeled {
    cloud: PointCloud,
    analysis: SuperpointAnalysis,
    samples: (Vec<FeatureVector>, Vec<SemanticClass>),
}

fn analyze_labeled(files: &[PathBuf], cfg: &PipelineConfig) -> Result<Vec<Labeled>> {
    parallel_map(files, thread_count(), |path| -> Result<Labeled> {
        let cloud = read_input(path, cfg)?;
        let gt = cloud
            .semantic()
            .ok_or_else(|| Error::InvalidInput(format!("{}: training cloud has no labels", path.display())))?
            .to_vec();
        let analysis = analyze(&cloud, &cfg.semantic).map_err(|e| context(path, e))?;
        let samples = training_samples(&analysis, &gt)?;
        Ok(Labeled {
            cloud,
            analysis,
            samples,
        })
    })
    .into_iter()
    .collect()
}

fn train_on(set: &[&Labeled], cfg: &PipelineConfig) -> Result<SvmModel> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for l in set {
        x.extend_from_slice(&l.samples.0);
        y.extend_from_slice(&l.samples.1);
    }
    let t = fit_svm(&x, &y, &cfg.svm)?;
    if !t.converged {
        log::warn!("SVM training hit the iteration cap after {} steps", t.iterations);
    }
    Ok(t.model)
}

fn evaluate(model: &SvmModel, l: &Labeled) -> Result<SemanticReport> {
    let pred = classify(model, &l.analysis.features, &l.analysis.lifted, &l.cloud)?;
    semantic_report(pred.semantic().expect("classified"), l.cloud.semantic().expect("labeled"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub model: SvmModel,
    pub files: usize,
    pub samples: usize,
    /// Mean mIoU of the model over its own training clouds.
    pub training_miou: f64,
    pub sweep: Vec<SweepRow>,
    /// `(perplexity, d_e)` used for the final model.
    pub selected: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub perplexity: f64,
    pub d_e: f64,
    pub fold_miou: Vec<f64>,
    pub mean_miou: f64,
}

impl SweepRow {
    pub fn to_line(&self) -> String {
        let folds: Vec<String> = self.fold_miou.iter().map(|m| format!("{m:.6}")).collect();
        format!(
            "perplexity={} d_e={} mean_miou={:.6} folds={}",
            self.perplexity,
            self.d_e,
            self.mean_miou,
            folds.join(",")
        )
    }
}

/// Cross-validated mIoU for every (perplexity, d_e) pair; file `i` lands in fold `i % folds`.
pub fn semantic_sweep(
    files: &[PathBuf],
    cfg: &PipelineConfig,
    perplexities: &[f64],
    d_es: &[f64],
    folds: usize,
) -> Result<Vec<SweepRow>> {
    if files.len() < folds || folds < 2 {
        return Err(Error::InvalidInput(format!(
            "{} files cannot form {folds} folds",
            files.len()
        )));
    }
    let mut rows = Vec::new();
    for &perplexity in perplexities {
        for &d_e in d_es {
            let local = cfg.clone().with_semantic_scale(perplexity, d_e);
            local.validate()?;
            let labeled = analyze_labeled(files, &local)?;
            let mut fold_miou = Vec::with_capacity(folds);
            for k in 0..folds {
                let train: Vec<&Labeled> = labeled.iter().enumerate().filter(|(i, _)| i % folds != k).map(|(_, l)| l).collect();
                let model = train_on(&train, &local)?;
                let mut sum = 0.0;
                let mut n = 0;
                for (_, l) in labeled.iter().enumerate().filter(|(i, _)| i % folds == k) {
                    sum += evaluate(&model, l)?.miou;
                    n += 1;
                }
                fold_miou.push(sum / n as f64);
            }
            let mean_miou = fold_miou.iter().sum::<f64>() / folds as f64;
            log::info!("sweep perplexity={perplexity} d_e={d_e} mean_miou={mean_miou:.4}");
            rows.push(SweepRow {
                perplexity,
                d_e,
                fold_miou,
                mean_miou,
            });
        }
    }
    Ok(rows)
}

/// Trains on every file. With `sweep_folds`, the grid sweep picks
/// perplexity and `d_e` first (highest mean mIoU, earliest on ties).
pub fn cmd_train(
    files: &[PathBuf],
    cfg: &PipelineConfig,
    model_out: &Path,
    sweep_folds: Option<usize>,
) -> Result<TrainSummary> {
    if files.is_empty() {
        return Err(Error::EmptyInput("training file list"));
    }
    let mut cfg = cfg.clone();
    let mut sweep = Vec::new();
    if let Some(folds) = sweep_folds {
        sweep = semantic_sweep(files, &cfg, &SWEEP_PERPLEXITIES, &SWEEP_D_E, folds)?;
        let best = sweep
            .iter()
            .fold(None::<&SweepRow>, |b, r| match b {
                Some(b) if b.mean_miou >= r.mean_miou => Some(b),
                _ => Some(r),
            })
            .expect("non-empty grid");
        cfg = cfg.with_semantic_scale(best.perplexity, best.d_e);
    }
    let labeled = analyze_labeled(files, &cfg)?;
    let all: Vec<&Labeled> = labeled.iter().collect();
    let model = train_on(&all, &cfg)?;
    model.save(model_out)?;
    let mut total = 0.0;
    for l in &labeled {
        total += evaluate(&model, l)?.miou;
    }
    Ok(TrainSummary {
        model,
        files: files.len(),
        samples: labeled.iter().map(|l| l.samples.0.len()).sum(),
        training_miou: total / labeled.len() as f64,
        sweep,
        selected: (cfg.semantic.tsne.perplexity, cfg.semantic.cluster.d_e),
    })
}

#[derive(Debug, Clone)]
pub struct SegmentSummary {
    pub cloud: PointCloud,
    pub report: Option<SemanticReport>,
    pub superpoints: usize,
}

/// Semantic labels for a cloud already in memory.
pub fn segment_cloud(cloud: &PointCloud, model: &SvmModel, cfg: &PipelineConfig) -> Result<SegmentSummary> {
    let a = analyze(cloud, &cfg.semantic)?;
    let pred = classify(model, &a.features, &a.lifted, cloud)?;
    let report = match cloud.semantic() {
        Some(gt) => Some(semantic_report(pred.semantic().expect("classified"), gt)?),
        None => None,
    };
    Ok(SegmentSummary {
        cloud: pred,
        report,
        superpoints: a.superpoints.count(),
    })
}

pub fn cmd_segment(input: &Path, model_path: &Path, cfg: &PipelineConfig, output: &Path) -> Result<SegmentSummary> {
    let model = SvmModel::load(model_path)?;
    let cloud = read_input(input, cfg)?;
    let out = segment_cloud(&cloud, &model, cfg).map_err(|e| context(input, e))?;
    if out.report.is_none() {
        log::warn!("{} has no ground-truth labels; metrics skipped", input.display());
    }
    write_cloud(output, &out.cloud, None)?;
    Ok(out)
}

/// Where the Leaf points for instance segmentation come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SemanticSource {
    GroundTruth,
    Predicted(PathBuf),
}

#[derive(Debug, Clone)]
pub struct InstanceSummary {
    /// Semantic layer used, plus instance ids: 0 off-leaf, `1..=count` for leaves.
    pub cloud: PointCloud,
    pub count: usize,
    pub report: Option<InstanceReport>,
    pub perplexity_used: f64,
}

/// SBD over the points that are Leaf in the ground truth.
pub fn leaf_sbd(pred_instance: &[u32], gt: &PointCloud) -> Result<Option<InstanceReport>> {
    let Some(gt_inst) = gt.instance() else {
        return Ok(None);
    };
    if pred_instance.len() != gt_inst.len() {
        return Err(Error::InvalidInput(format!(
            "prediction has {} points, ground truth {}",
            pred_instance.len(),
            gt_inst.len()
        )));
    }
    let keep: Vec<usize> = match gt.semantic() {
        Some(s) => (0..s.len()).filter(|&i| s[i] == SemanticClass::Leaf).collect(),
        None => (0..gt_inst.len()).collect(),
    };
    if keep.is_empty() {
        return Ok(None);
    }
    let p: Vec<u32> = keep.iter().map(|&i| pred_instance[i]).collect();
    let g: Vec<u32> = keep.iter().map(|&i| gt_inst[i]).collect();
    instance_report(&p, &g).map(Some)
}

/// Leaf instances for a cloud in memory; `perplexity` overrides the configured one.
pub fn instance_cloud(
    cloud: &PointCloud,
    cfg: &PipelineConfig,
    source: &SemanticSource,
    perplexity: Option<f64>,
) -> Result<InstanceSummary> {
    let semantic: Vec<SemanticClass> = match source {
        SemanticSource::GroundTruth => cloud
            .semantic()
            .ok_or_else(|| Error::InvalidInput("ground-truth mode needs semantic labels".into()))?
            .to_vec(),
        SemanticSource::Predicted(model_path) => {
            let model = SvmModel::load(model_path)?;
            let seg = segment_cloud(cloud, &model, cfg)?;
            seg.cloud.semantic().expect("classified").to_vec()
        }
    };
    let leaf_idx: Vec<usize> = (0..semantic.len()).filter(|&i| semantic[i] == SemanticClass::Leaf).collect();
    if leaf_idx.is_empty() {
        return Err(Error::InvalidInput("no Leaf points to separate into instances".into()));
    }
    let leaves = cloud.subset(&leaf_idx);
    let mut params = cfg.instance.clone();
    if let Some(p) = perplexity {
        params.perplexity = p;
    }
    let r = instance_segment(&leaves, &params, &cfg.semantic.tsne)?;
    let mut ids = vec![0u32; cloud.len()];
    for (&i, &l) in leaf_idx.iter().zip(r.cloud.instance().expect("instance layer")) {
        ids[i] = l + 1;
    }
    let report = leaf_sbd(&ids, cloud)?;
    let out = cloud.clone().clear_labels().with_semantic(semantic)?.with_instance(ids)?;
    Ok(InstanceSummary {
        cloud: out,
        count: r.count,
        report,
        perplexity_used: r.perplexity_used,
    })
}

pub fn cmd_instance(
    input: &Path,
    cfg: &PipelineConfig,
    source: &SemanticSource,
    output: &Path,
) -> Result<InstanceSummary> {
    let cloud = read_input(input, cfg)?;
    let out = instance_cloud(&cloud, cfg, source, None).map_err(|e| context(input, e))?;
    write_cloud(output, &out.cloud, None)?;
    Ok(out)
}

/// One SBD per perplexity; runs concurrently across perplexities.
pub fn instance_sweep(
    input: &Path,
    cfg: &PipelineConfig,
    source: &SemanticSource,
    perplexities: &[f64],
) -> Result<Vec<(f64, Option<f64>)>> {
    let cloud = read_input(input, cfg)?;
    parallel_map(perplexities, thread_count(), |&p| {
        instance_cloud(&cloud, cfg, source, Some(p)).map(|s| (p, s.report.map(|r| r.sbd)))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub semantic: Option<SemanticReport>,
    pub instance: Option<InstanceReport>,
}

/// Compares a prediction written by this tool with a ground-truth cloud.
pub fn cmd_eval(pred_path: &Path, gt_path: &Path, cfg: &PipelineConfig) -> Result<EvalReport> {
    let pred = read_output(pred_path)?;
    let gt = read_input(gt_path, cfg)?;
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "{} has {} points but {} has {}",
            pred_path.display(),
            pred.len(),
            gt_path.display(),
            gt.len()
        )));
    }
    let semantic = match (pred.semantic(), gt.semantic()) {
        (Some(p), Some(g)) => Some(semantic_report(p, g)?),
        _ => None,
    };
    let instance = match pred.instance() {
        Some(p) => leaf_sbd(p, &gt)?,
        None => None,
    };
    if semantic.is_none() && instance.is_none() {
        return Err(Error::InvalidInput("no label layer shared by prediction and ground truth".into()));
    }
    Ok(EvalReport { semantic, instance })
}

pub fn cmd_synth(spec: &PlantSpec, output: &Path) -> Result<PointCloud> {
    let cloud = generate(spec)?;
    write_cloud(output, &cloud, None)?;
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u64> = (0..50).collect();
        let out = parallel_map(&items, 4, |&x| x * x);
        assert_eq!(out, items.iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(parallel_map(&[] as &[u8], 3, |&x| x).is_empty());
    }

    #[test]
    fn purity_counts_majorities() {
        use SemanticClass::*;
        let p = superpoint_purity(&[0, 0, 0, 1], &[Leaf, Leaf, Stem, Stem], 2);
        assert_eq!(p, 0.75);
    }

    #[test]
    fn leaf_sbd_ignores_stem_points() {
        use SemanticClass::*;
        let gt = PointCloud::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
            .unwrap()
            .with_semantic(vec![Leaf, Leaf, Stem])
            .unwrap()
            .with_instance(vec![1, 1, 0])
            .unwrap();
        let r = leaf_sbd(&[5, 5, 9], &gt).unwrap().unwrap();
        assert_eq!(r.sbd, 1.0);
    }
}
