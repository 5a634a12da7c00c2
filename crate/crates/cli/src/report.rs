//! Plain-text run report. Contains no wall-clock values so that repeated
//! runs produce identical files; timings go to `timings.csv` on request.

use std::fmt::Write as _;
use std::path::Path;

use crowdflow::pipeline::StageResult;
use crowdflow::{FlowResult, MotionField, PipelineConfig};

fn stage(out: &mut String, name: &str, stage: &StageResult) {
    let r = &stage.report;
    writeln!(out, "[{name}]").unwrap();
    let orientations: Vec<String> = stage
        .label_set
        .orientations()
        .iter()
        .map(|t| format!("{t:.6}"))
        .collect();
    writeln!(
        out,
        "labels = {} (background + {})",
        stage.label_set.num_labels(),
        orientations.len()
    )
    .unwrap();
    if name == "fine" {
        writeln!(out, "orientations_deg = {}", orientations.join(" ")).unwrap();
    }
    writeln!(out, "initial_energy = {:.6}", r.initial_energy).unwrap();
    writeln!(out, "final_energy = {:.6}", r.energy).unwrap();
    writeln!(out, "sweeps = {}", r.sweeps).unwrap();
    writeln!(out, "accepted_moves = {}", r.accepted_moves()).unwrap();
    writeln!(out, "segments = {}", stage.segments.len()).unwrap();
    out.push_str(&r.table());
    out.push('\n');
}

pub fn render(
    input: &Path,
    field: &MotionField,
    cfg: &PipelineConfig,
    result: &FlowResult,
) -> String {
    let mut out = String::new();
    let p = &cfg.params;
    writeln!(out, "input = {}", input.display()).unwrap();
    writeln!(
        out,
        "grid = {}x{} ({} nodes)",
        field.width(),
        field.height(),
        field.len()
    )
    .unwrap();
    out.push('\n');
    writeln!(out, "[parameters]").unwrap();
    writeln!(out, "tau = {}", p.tau).unwrap();
    writeln!(out, "c1 = {}", p.c1).unwrap();
    writeln!(out, "c2 = {}", p.c2).unwrap();
    writeln!(out, "c3 = {}", p.c3).unwrap();
    let how = if cfg.size_thresh.is_some() {
        ""
    } else {
        " (default)"
    };
    writeln!(out, "size_thresh = {}{how}", result.size_thresh).unwrap();
    writeln!(out, "merge_thresh = {}", cfg.merge_thresh).unwrap();
    out.push('\n');

    stage(&mut out, "coarse", &result.coarse);
    match &result.fine {
        Some(fine) => stage(&mut out, "fine", fine),
        None => writeln!(
            out,
            "[fine]\nskipped: no coarse segment larger than size_thresh\n"
        )
        .unwrap(),
    }

    writeln!(out, "[merge]").unwrap();
    writeln!(out, "steps = {}", result.merge.steps.len()).unwrap();
    for s in &result.merge.steps {
        writeln!(
            out,
            "merge {} + {} (mean boundary gradient {:.6})",
            s.first, s.second, s.mean_gradient
        )
        .unwrap();
    }
    writeln!(out, "flows = {}", result.num_flows()).unwrap();
    out
}
