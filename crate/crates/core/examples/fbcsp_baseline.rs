//! Filter-bank CSP with mutual-information selection on data whose class
//! information lives in a single band.

use factormi::baselines::{BaselineConfig, Fbcsp};
use factormi::data::{generate_synthetic, split_train_test, ClassPattern, EegTrial, NuisanceSource, SyntheticSpec};

fn main() -> factormi::Result<()> {
    let mut spec = SyntheticSpec::new(4, 30, 8, 250, 3);
    spec.amplitude = 1.5;
    spec.patterns = (0..4)
        .map(|c| ClassPattern {
            channels: vec![2 * c, 2 * c + 1],
            band: (17.0, 19.0),
        })
        .collect();
    spec.nuisance = [(5.0, 7.0), (25.0, 27.0)]
        .iter()
        .map(|&band| NuisanceSource { band, amplitude: 3.0 })
        .collect();
    let ds = generate_synthetic(&spec)?;
    let (train, test) = split_train_test(&ds, 10, 3)?;
    let cfg = BaselineConfig::default();
    let m = Fbcsp::fit(&refs(&train.trials), 4, spec.sampling_rate, &cfg)?;
    for (rank, &f) in m.selected.iter().enumerate() {
        let band = cfg.bank.bands[m.band_of(f)];
        println!("rank {rank}: feature {f:>3}  band {:>2}-{:>2} Hz  MI {:.3} nats", band.low, band.high, m.scores[f]);
    }
    println!("bands used {:?}", m.selected_bands());
    println!("test accuracy {:.3}", m.accuracy(&refs(&test.trials))?);
    Ok(())
}

fn refs(ts: &[EegTrial]) -> Vec<&EegTrial> {
    ts.iter().collect()
}
