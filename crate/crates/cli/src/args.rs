use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocmesh_core::contour::DEFAULT_BISECT_ITERS;
use ocmesh_core::octree::{DEFAULT_K_DILATE, DEFAULT_L_ROOT, DEFAULT_MAX_FINE_CELLS, DEFAULT_S_MAX};
use ocmesh_core::pipeline::{DEFAULT_AINV_FACTOR, DEFAULT_D_MIN, DEFAULT_PIXELS_PER_CELL};
use ocmesh_core::{PipelineConfig, Vec3};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "ocmesh",
    version,
    about = "View-consistent meshes from signed distance fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the LOD octree for the cameras and write the mesh.
    Extract(ExtractArgs),
    /// Count leaves, vertices and faces as LOD criteria are enabled.
    Ablate(AblateArgs),
    /// Render camera pairs and score warped SSIM.
    Consistency(ConsistencyArgs),
    /// Dual contour on a uniform grid.
    #[command(name = "oracle-dc")]
    OracleDc(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Mode {
    /// One mesh for all cameras.
    #[value(name = "single", alias = "multiview_single_mesh")]
    #[serde(rename = "multiview_single_mesh")]
    Single,
    /// An independent mesh per camera.
    #[value(name = "per-view", alias = "per_view_baseline")]
    #[serde(rename = "per_view_baseline")]
    PerView,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Scene file, one s-expression per component.
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera file, a JSON array of camera records.
    #[arg(long)]
    pub cameras: PathBuf,
}

#[derive(Debug, Args)]
pub struct Tuning {
    /// Target cell size in pixels.
    #[arg(long, default_value_t = DEFAULT_PIXELS_PER_CELL)]
    pub pixels_per_cell: f64,
    /// Angular target of invisible or empty cells, as a multiple of the visible one.
    #[arg(long, default_value_t = DEFAULT_AINV_FACTOR)]
    pub ainv_factor: f64,
    /// Distance floor of the angular diameter, in meters.
    #[arg(long, default_value_t = DEFAULT_D_MIN)]
    pub dmin: f64,
    /// Side of the root cube.
    #[arg(long, default_value_t = DEFAULT_L_ROOT)]
    pub lroot: f64,
    /// Min corner of the root cube as `x,y,z`; centered on the cameras if omitted.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub origin: Option<[f64; 3]>,
    /// Coarse node budget.
    #[arg(long, default_value_t = DEFAULT_S_MAX)]
    pub smax: usize,
    /// Dilation distance of the visible set, in cells.
    #[arg(long, default_value_t = DEFAULT_K_DILATE)]
    pub kdilate: u32,
    /// Bisection steps per edge crossing.
    #[arg(long, default_value_t = DEFAULT_BISECT_ITERS)]
    pub bisect_iters: u32,
    /// Abort when the fine phase would hold more cells than this.
    #[arg(long, default_value_t = DEFAULT_MAX_FINE_CELLS)]
    pub max_fine_cells: usize,
}

impl Tuning {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            pixels_per_cell: self.pixels_per_cell,
            ainv_factor: self.ainv_factor,
            d_min: self.dmin,
            l_root: self.lroot,
            root_origin: self.origin.map(Vec3::from),
            s_max: self.smax,
            k_dilate: self.kdilate,
            max_fine_cells: self.max_fine_cells,
            bisect_iters: self.bisect_iters,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_enum, default_value = "single")]
    pub mode: Mode,
    /// Mesh file, `.obj` or `.ply`. Per-view meshes go to `<stem>_view<i>.<ext>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report file; stdout if omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Rows to build: a prefix of `angular,occupancy,visibility`.
    #[arg(long, default_value = "angular,occupancy,visibility")]
    pub rows: String,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    #[arg(long, value_enum, default_value = "single")]
    pub mode: Mode,
    /// Camera index pairs as `src-dst,...`; consecutive cameras if omitted.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Direction toward the light as `x,y,z`.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0.3,-0.4,0.8")]
    pub light: [f64; 3],
    /// Directory for depth, shade and SSIM images.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Min corner of the grid as `x,y,z`; centered on the world origin if omitted.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub origin: Option<[f64; 3]>,
    /// Side of the grid cube.
    #[arg(long)]
    pub lroot: f64,
    /// The grid has `2^depth` cells per side.
    #[arg(long)]
    pub depth: u32,
    #[arg(long, default_value_t = DEFAULT_BISECT_ITERS)]
    pub bisect_iters: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    let mut out = [0.0f64; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        if !o.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec3_values() {
        assert_eq!(parse_vec3("1, -2.5,3").unwrap(), [1.0, -2.5, 3.0]);
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("1,2,x").is_err());
        assert!(parse_vec3("1,2,inf").is_err());
    }

    #[test]
    fn negative_origin_parses() {
        let cli = Cli::try_parse_from([
            "ocmesh",
            "oracle-dc",
            "--scene",
            "s",
            "--origin",
            "-1,-1,-1",
            "--lroot",
            "2",
            "--depth",
            "3",
        ])
        .unwrap();
        let Command::OracleDc(a) = cli.command else { panic!() };
        assert_eq!(a.origin, Some([-1.0; 3]));
    }
}
