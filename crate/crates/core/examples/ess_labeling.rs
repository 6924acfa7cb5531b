//! Labels held-out samples by their nearest class in state space, for each
//! distance metric, then compares angle and amplitude encodings under noise.

use quid_lab::data::{synth_clusters, FeatureScaler, SynthSpec};
use quid_lab::encode::EncoderConfig;
use quid_lab::ess::{compare_encodings, validate_ess, DistanceMetric, HoldoutSplit};

fn main() -> quid_lab::Result<()> {
    let raw = synth_clusters(&SynthSpec::new(4, 8, 60, 0.3, 5))?;
    let angle = EncoderConfig::angle_for_dim(4, raw.dim());
    let amplitude = EncoderConfig::amplitude(3);
    let scaled = FeatureScaler::fit(raw.features(), angle.scale_range)?.transform_dataset(&raw);
    let split = HoldoutSplit::default();

    for metric in [DistanceMetric::Frobenius, DistanceMetric::Trace, DistanceMetric::HilbertSchmidt] {
        let report = validate_ess(&scaled, &angle, metric, None, &split)?;
        println!("{metric:>16}: accuracy {:.3} in {:.3}s", report.accuracy, report.seconds);
        print!("{}", report.class_rows_csv(false));
    }

    let levels = [0.0, 0.02, 0.1];
    let cmp = compare_encodings(&scaled, &[angle, amplitude], DistanceMetric::Frobenius, &levels, &split)?;
    for (name, row) in ["angle", "amplitude"].iter().zip(&cmp.accuracy) {
        println!("{name:>9}: {:?}", row.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}
