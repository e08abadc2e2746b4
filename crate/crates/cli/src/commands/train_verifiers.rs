use anyhow::Result;
use osv_core::eval::{group_features, train_verifiers, VerifierSettings};
use osv_core::svm::verifier;
use osv_core::transfer::load_features;
use osv_core::KernelSpec;

use super::require_file;
use crate::args::TrainVerifiersArgs;
use crate::UsageError;

pub fn run(a: &TrainVerifiersArgs) -> Result<()> {
    if !(a.c > 0.0 && a.c.is_finite()) {
        return Err(UsageError(format!("C must be positive, got {}", a.c)).into());
    }
    if a.forgeries == 0 || a.train_count == 0 {
        return Err(UsageError("train count and forgery count must be positive".into()).into());
    }
    require_file(&a.features, "feature file")?;
    let (features, index) = load_features(&a.features)?;
    let settings = VerifierSettings {
        kernel: KernelSpec::parse(&a.kernel, index.dim)?,
        c: a.c,
        forgery_count: a.forgeries,
    };
    let users = group_features(&features);
    let verifiers = train_verifiers(&users, a.train_count, a.seed, &settings)?;
    for v in &verifiers {
        verifier::save(v, &a.out.join(format!("user_{:04}.osvv", v.user_id)))?;
    }
    let unconverged = verifiers.iter().filter(|v| !v.solution.converged).count();
    println!(
        "wrote {} verifiers ({} kernel) to {}{}",
        verifiers.len(),
        settings.kernel.label(),
        a.out.display(),
        if unconverged > 0 { format!("; {unconverged} did not converge") } else { String::new() }
    );
    Ok(())
}
