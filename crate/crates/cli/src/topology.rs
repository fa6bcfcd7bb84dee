//! Point-pattern dumps of the tiered network.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mmtier::analytics::{HopPolicy, NetworkParams};
use mmtier::geometry::{build_tier_topology, TierTopology, Window};
use mmtier::rng::{domain, stream};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub fn topology_window(cfg: &ExperimentConfig) -> Result<Window, CliError> {
    Ok(Window::disk(cfg.topology_window_m)?.with_guard(cfg.topology_guard_m)?)
}

/// Topology with the same gain `k` on every hop. The random stream depends on
/// the seed and `k` only.
pub fn build_topology(cfg: &ExperimentConfig, k: usize, policy: HopPolicy) -> Result<TierTopology, CliError> {
    let net = NetworkParams {
        gain_per_hop: k,
        hop_policy: policy,
        ..cfg.network()
    };
    let window = topology_window(cfg)?;
    let mut rng = stream(cfg.seed, domain::TOPOLOGY, k as u64);
    Ok(build_tier_topology(&net, &cfg.channel, &window, &mut rng)?)
}

fn write_with<F>(path: PathBuf, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(&path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    f(&mut out)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    Ok(path)
}

/// Writes `topology.csv` and `topology.dat` into `dir`.
pub fn emit_topology(cfg: &ExperimentConfig, dir: &Path) -> Result<(TierTopology, Vec<PathBuf>), CliError> {
    cfg.validate()?;
    let topo = build_topology(cfg, cfg.gain_per_hop, cfg.hop_policy())?;
    let csv = write_with(dir.join("topology.csv"), |w| topo.write_csv(w))?;
    let dat = write_with(dir.join("topology.dat"), |w| topo.write_blocks(w))?;
    Ok((topo, vec![csv, dat]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn reference_settings_give_expected_tier_counts() {
        for (k, tiers) in [(1, 13), (6, 3)] {
            let cfg = parse_config(&format!(
                "blockage = exponential\ngain_per_hop = {k}\ntopology_window_m = 300\ntopology_guard_m = 100"
            ))
            .unwrap()
            .config;
            let topo = build_topology(&cfg, k, cfg.hop_policy()).unwrap();
            assert_eq!(topo.tiers.len(), tiers);
        }
    }

    #[test]
    fn uneven_split_is_rejected_unless_floored() {
        let cfg = parse_config("blockage = exponential\ngain_per_hop = 5").unwrap().config;
        assert!(build_topology(&cfg, 5, HopPolicy::Exact).is_err());
        assert_eq!(build_topology(&cfg, 5, HopPolicy::Floor).unwrap().hops(), 2);
    }
}
