use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use labelfuse::components::connected_components;
use labelfuse::fusion::fuse_chain_detailed;
use labelfuse::io::{load_label, load_prob, save_id_map, save_label, write_atomic};
use labelfuse::metrics::{evaluate, to_csv, MetricsRecord};
use labelfuse::postprocess::postprocess_pipeline_detailed;
use labelfuse::{
    ce_loss, consistency_loss, dice_loss, ema_run, gradcheck, Error, LabelVolume, ParamVector,
};

use crate::LabelArgs;

/// Failure carrying the process exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_io_or_format() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::io(format!("json encoding failed: {e}"))
    }
}

type CliResult = Result<(), CliError>;

fn require_file(path: &Path) -> CliResult {
    if !path.is_file() {
        return Err(CliError::io(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn require_out_dir(path: &Path) -> CliResult {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        if !d.is_dir() {
            return Err(CliError::io(format!(
                "output directory does not exist: {}",
                d.display()
            )));
        }
    }
    Ok(())
}

fn check_label_args(labels: &LabelArgs) -> CliResult {
    if labels.k == 0 || labels.k > 256 {
        return Err(CliError::validation(format!(
            "class count must be in 1..=256, got {}",
            labels.k
        )));
    }
    for (name, l) in [
        ("--vs-label", labels.vs_label),
        ("--cochlea-label", labels.cochlea_label),
    ] {
        if l == 0 || l as usize >= labels.k {
            return Err(CliError::validation(format!(
                "{name} {l} must be a foreground class below {}",
                labels.k
            )));
        }
    }
    if labels.vs_label == labels.cochlea_label {
        return Err(CliError::validation(
            "--vs-label and --cochlea-label must differ",
        ));
    }
    if !(labels.z_max >= 0.0) {
        return Err(CliError::validation("--z-max must be nonnegative"));
    }
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn fuse(
    probs: &[PathBuf],
    output: &Path,
    postprocess: bool,
    joint_json: Option<&Path>,
    labels: &LabelArgs,
) -> CliResult {
    for p in probs {
        require_file(p)?;
    }
    require_out_dir(output)?;
    if let Some(j) = joint_json {
        require_out_dir(j)?;
    }
    if postprocess {
        check_label_args(labels)?;
    }
    let models = probs
        .iter()
        .map(|p| load_prob(p))
        .collect::<Result<Vec<_>, _>>()?;
    let chain = fuse_chain_detailed(&models)?;
    let fused = if postprocess {
        if chain.labels.k() != labels.k {
            return Err(CliError::validation(format!(
                "models have {} channels but --classes is {}",
                chain.labels.k(),
                labels.k
            )));
        }
        postprocess_pipeline_detailed(
            &chain.labels,
            labels.vs_label,
            labels.cochlea_label,
            labels.z_max,
        )?
        .0
    } else {
        chain.labels
    };
    save_label(&fused, output)?;
    if let Some(j) = joint_json {
        let text = serde_json::to_string_pretty(&chain.joints)?;
        write_atomic(j, text.as_bytes())?;
    }
    eprintln!(
        "fused {} models into {} ({} correction steps)",
        models.len(),
        output.display(),
        chain.joints.len()
    );
    Ok(())
}

fn case_name(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name)
        .to_string()
}

fn is_nifti(path: &Path) -> bool {
    let n = path.to_string_lossy();
    n.ends_with(".nii") || n.ends_with(".nii.gz")
}

fn paired_cases(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>, CliError> {
    if pred.is_dir() != gt.is_dir() {
        return Err(CliError::validation(
            "--pred and --gt must both be files or both be directories",
        ));
    }
    if !pred.is_dir() {
        require_file(pred)?;
        require_file(gt)?;
        return Ok(vec![(
            case_name(pred),
            pred.to_path_buf(),
            gt.to_path_buf(),
        )]);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(pred)
        .map_err(|e| CliError::io(format!("{}: {e}", pred.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_nifti(p))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(CliError::io(format!(
            "no NIfTI files in {}",
            pred.display()
        )));
    }
    let mut out = Vec::with_capacity(entries.len());
    for p in entries {
        let g = gt.join(p.file_name().unwrap());
        require_file(&g)?;
        out.push((case_name(&p), p, g));
    }
    Ok(out)
}

pub fn eval(
    pred: &Path,
    gt: &Path,
    case: Option<&str>,
    classes: &[u8],
    k: usize,
    output: Option<&Path>,
) -> CliResult {
    let cases = paired_cases(pred, gt)?;
    if let Some(o) = output {
        require_out_dir(o)?;
    }
    if let Some(bad) = classes.iter().find(|&&c| c as usize >= k) {
        return Err(CliError::validation(format!(
            "class {bad} is not below class count {k}"
        )));
    }
    let mut records: Vec<(String, MetricsRecord)> = Vec::with_capacity(cases.len());
    let single = cases.len() == 1 && !pred.is_dir();
    for (name, p, g) in cases {
        let pv = load_label(&p, k)?;
        let gv = load_label(&g, k)?;
        let rec = evaluate(&pv, &gv, classes)?;
        let name = match (single, case) {
            (true, Some(c)) => c.to_string(),
            _ => name,
        };
        records.push((name, rec));
    }
    let csv = to_csv(records.iter().map(|(n, r)| (n.as_str(), r)));
    match output {
        Some(o) => write_atomic(o, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn postprocess(input: &Path, output: &Path, stats: bool, labels: &LabelArgs) -> CliResult {
    require_file(input)?;
    require_out_dir(output)?;
    check_label_args(labels)?;
    let mask = load_label(input, labels.k)?;
    let (out, report) =
        postprocess_pipeline_detailed(&mask, labels.vs_label, labels.cochlea_label, labels.z_max)?;
    save_label(&out, output)?;
    if stats {
        print_json(&report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CcReport<'a> {
    class_label: u8,
    components: &'a [labelfuse::ComponentStats],
}

pub fn cc(input: &Path, class_label: u8, k: usize, ids: Option<&Path>) -> CliResult {
    require_file(input)?;
    if let Some(i) = ids {
        require_out_dir(i)?;
    }
    let mask: LabelVolume = load_label(input, k)?;
    mask.check_class(class_label)?;
    let comps = connected_components(&mask, class_label);
    if let Some(i) = ids {
        save_id_map(mask.dims(), mask.spacing(), &comps.ids, i)?;
    }
    print_json(&CcReport {
        class_label,
        components: &comps.stats,
    })
}

pub struct LossInputs {
    pub prob: Option<PathBuf>,
    pub label: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub student: Option<PathBuf>,
    pub eps: f64,
    pub grad_check: bool,
    pub seed: u64,
    pub volumes: usize,
}

#[derive(Serialize)]
struct SegLosses {
    dice_loss: f64,
    ce_loss: f64,
    seg_loss: f64,
}

#[derive(Serialize)]
struct ConLoss {
    consistency_loss: f64,
}

pub fn losses(args: LossInputs) -> CliResult {
    if args.grad_check {
        if args.volumes == 0 {
            return Err(CliError::validation("--volumes must be positive"));
        }
        return print_json(&gradcheck::run(args.seed, args.volumes));
    }
    match (&args.prob, &args.label, &args.teacher, &args.student) {
        (Some(p), Some(l), None, None) => {
            require_file(p)?;
            require_file(l)?;
            let probs = load_prob(p)?;
            let labels = load_label(l, probs.k())?;
            let dice = dice_loss(&probs, &labels, args.eps, false)?.value;
            let ce = ce_loss(&probs, &labels, false)?.value;
            print_json(&SegLosses {
                dice_loss: dice,
                ce_loss: ce,
                seg_loss: dice + ce,
            })
        }
        (None, None, Some(t), Some(s)) => {
            require_file(t)?;
            require_file(s)?;
            let teacher = load_prob(t)?;
            let student = load_prob(s)?;
            print_json(&ConLoss {
                consistency_loss: consistency_loss(&teacher, &student, false)?.value,
            })
        }
        _ => Err(CliError::validation(
            "give --prob with --label, --teacher with --student, or --grad-check",
        )),
    }
}

pub fn ema(teacher: &Path, students: &[PathBuf], output: &Path, decay: f64) -> CliResult {
    require_file(teacher)?;
    for s in students {
        require_file(s)?;
    }
    require_out_dir(output)?;
    let t = ParamVector::load(teacher)?;
    let ss = students
        .iter()
        .map(|s| ParamVector::load(s))
        .collect::<Result<Vec<_>, _>>()?;
    ema_run(&t, &ss, decay)?.save(output)?;
    Ok(())
}
