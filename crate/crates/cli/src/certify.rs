use pendulum_core::{certify_block, CertificateReport};

use crate::args::CertifyArgs;
use crate::config::Scenario;
use crate::output;
use crate::{CliError, Outcome};

/// Applies `--c` and `--samples` on top of the scenario.
pub fn resolve(args: &CertifyArgs) -> Result<Scenario, CliError> {
    let mut s = args.common.scenario()?;
    if let Some(c) = args.c {
        s.c = Some(c);
    }
    if let Some([t, p, d]) = args.samples {
        s.sampling.time_samples = t;
        s.sampling.position_samples = p;
        s.sampling.direction_samples = d;
    }
    s.validate()?;
    Ok(s)
}

pub fn certify(s: &Scenario) -> Result<CertificateReport, CliError> {
    Ok(certify_block(&s.params, &s.pivot, s.c, &s.sampling)?)
}

pub fn run(args: &CertifyArgs) -> Result<Outcome, CliError> {
    let scenario = resolve(args)?;
    let report = certify(&scenario)?;
    output::ensure_dir(&args.common.out)?;
    output::write_json(&args.common.out.join(output::CERTIFICATE_JSON), &report)?;
    println!(
        "certify: {} (c* = {:.6e}, c = {:.6e}, max F' on shell = {:.6e}, index {})",
        if report.verdict { "PASS" } else { "FAIL" },
        report.c_star,
        report.c_used,
        report.shell_max_fdot,
        report.index
    );
    Ok(Outcome::from_pass(report.verdict))
}
