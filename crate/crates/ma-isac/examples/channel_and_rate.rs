//! Steering vectors, per-vehicle channel gains and the OFDM sum-rate of
//! matched beams on the default half-wavelength arrays.

use ma_isac::config::RunConfigFile;
use ma_isac::model::{rate_gains, steering, sum_rate, BeamformerSet};

fn main() -> ma_isac::Result<()> {
    let s = RunConfigFile::default().scenario()?;
    let (cfg, layout) = (&s.cfg, &s.layout);
    println!("wavelength {:.4e} m, tx {:?}", cfg.wavelength, layout.tx);

    for (k, v) in s.vehicles.iter().enumerate() {
        let a = steering(&layout.tx, v.theta, cfg.wavelength)?;
        let g = v.gains(cfg)?;
        println!(
            "vehicle {k}: theta {:.2} deg, |a|^2 = {:.1}, path loss {:.3e}, echo amplitude {:.3e}, doppler {:.1} Hz",
            v.theta.to_degrees(),
            a.norm_squared(),
            g.alpha,
            g.beta,
            v.doppler(cfg)
        );
    }

    let beams = BeamformerSet::matched(cfg, layout, &s.vehicles, s.map.clone())?;
    let per_carrier = rate_gains(cfg, layout, &beams, &s.vehicles)?;
    println!("first subcarrier SNR per watt {:.3e}", per_carrier[0]);
    println!("sum-rate {:.6} bit/s/Hz", sum_rate(cfg, layout, &beams, &s.vehicles)?);
    Ok(())
}
