use endoscale::fusion::{fuse_multires, FusionConfig};
use endoscale::raster::DepthUnit;

use super::{data_err, ensure_distinct};
use crate::cli::FuseArgs;
use crate::config::PipelineConfig;
use crate::error::Result;
use crate::formats::{read_pfm, write_pfm};

pub fn run(cfg: &PipelineConfig, args: &FuseArgs) -> Result<()> {
    ensure_distinct(&[&args.low, &args.high], &args.out)?;
    let low = read_pfm(&args.low, DepthUnit::Relative)?;
    let high = read_pfm(&args.high, DepthUnit::Relative)?;
    let mut fusion = cfg.fusion.clone();
    if let Some(d) = args.domain {
        fusion.domain = d.into();
    }
    // the pair itself must be ordered before it is compared to the config
    FusionConfig { low_res: low.dims(), high_res: high.dims(), ..fusion.clone() }.validate().map_err(data_err)?;
    let fused = fuse_multires(&low, &high, &fusion).map_err(data_err)?;
    write_pfm(&args.out, &fused.value)?;
    eprintln!("fused {}x{} ({} clamped)", high.width(), high.height(), fused.clamped);
    Ok(())
}
