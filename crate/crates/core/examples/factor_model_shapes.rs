//! Build the full-size factorization model and print its layer shapes and
//! parameter counts.

use factormi::data::EegTrial;
use factormi::model::{FactorModel, ModelConfig};

fn main() -> factormi::Result<()> {
    let cfg = ModelConfig::default();
    let model = FactorModel::build(cfg.clone(), 0)?;
    println!("input {} x {}", cfg.n_channels, cfg.n_samples);
    println!("temporal conv width {}, pooled width {}", cfg.conv_width(), cfg.pooled_width());
    println!("extractor feature length {}", model.feature_len());
    println!("fused MLP input {}", cfg.fused_len());
    for (name, shape) in model.generator.shape_signature() {
        println!("  extractor {name:<14} {shape:?}");
    }
    let trial = EegTrial::zeros(cfg.n_channels, cfg.n_samples, 0);
    let common = model.extract_common(&trial)?;
    let specific = model.extract_class_specific(&trial)?;
    println!("discriminator scores {:?}", model.discriminate(&common.0)?);
    println!("logits {:?}", model.classify(&common.0, &specific.0)?);
    let counts = model.param_counts();
    println!(
        "parameters: generator {}, discriminator {}, class-specific {}, head {}, total {}",
        counts.generator,
        counts.discriminator,
        counts.class_specific,
        counts.head,
        counts.total()
    );
    Ok(())
}
