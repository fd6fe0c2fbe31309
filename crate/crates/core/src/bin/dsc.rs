use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dsc::harness::{
    generate_distorted_mesh, run_dispersion_test, ExperimentConfig, GridSpec, HarnessError, TimeStep,
};
use dsc::heat_model::HeatModel;
use dsc::mesh::{compute_geometry, load_mesh_file, validate_regular, write_mesh, Material};

#[derive(Parser)]
#[command(name = "dsc", version, about = "Dual scattering channel heat-diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dispersion experiment described by a config file
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a mesh file for regularity and valid cell geometry
    Validate {
        #[arg(long)]
        mesh: PathBuf,
    },
    /// Print per-cell spectral radii for the configured time step
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a distorted structured mesh
    GenMesh {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
        #[arg(long, default_value_t = 1)]
        nz: usize,
        #[arg(long, default_value_t = 1.0)]
        pitch: f64,
        #[arg(long, default_value_t = 0.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda_h: f64,
        #[arg(long, default_value_t = 1.0)]
        c_v: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const FAIL: u8 = 1;
const CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => run(&config),
        Command::Validate { mesh } => validate(&mesh),
        Command::Stability { config } => stability(&config),
        Command::GenMesh {
            nx,
            ny,
            nz,
            pitch,
            amplitude,
            seed,
            lambda_h,
            c_v,
            out,
        } => {
            let spec = GridSpec {
                nx,
                ny,
                nz,
                pitch,
                amplitude,
                seed,
            };
            let result = generate_distorted_mesh(&spec, Material::new(lambda_h, c_v)).and_then(|mesh| {
                let file = std::fs::File::create(&out).map_err(|source| HarnessError::Io {
                    path: out.clone(),
                    source,
                })?;
                Ok(write_mesh(&mesh, std::io::BufWriter::new(file))?)
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => config_error(e),
            }
        }
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(CONFIG)
}

fn run(path: &PathBuf) -> ExitCode {
    let config = match ExperimentConfig::from_file(path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    match run_dispersion_test(&config) {
        Ok(report) => {
            print!("{report}");
            if report.passes() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(FAIL)
            }
        }
        Err(e) => config_error(e),
    }
}

fn validate(path: &PathBuf) -> ExitCode {
    let mesh = match load_mesh_file(path) {
        Ok(m) => m,
        Err(e) => return config_error(e),
    };
    let report = validate_regular(&mesh);
    print!("{report}");
    let mut ok = report.is_ok();
    for cell in 0..mesh.num_cells() {
        if let Err(e) = compute_geometry(&mesh, cell) {
            println!("geometry: {e}");
            ok = false;
        }
    }
    println!(
        "{} cells, {} interfaces, {} boundary faces",
        mesh.num_cells(),
        mesh.interfaces.len(),
        mesh.boundary_faces.len()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(FAIL)
    }
}

fn stability(path: &PathBuf) -> ExitCode {
    let result = ExperimentConfig::from_file(path).and_then(|config| {
        let mesh = config.build_mesh()?;
        let mut model = HeatModel::with_default_step(&mesh)?;
        if let TimeStep::Fixed(t) = config.tau {
            model.set_tau(t)?;
        }
        let report = model.stability_report()?;
        Ok((model.tau(), report))
    });
    match result {
        Ok((tau, report)) => {
            println!("tau {tau:e}");
            print!("{report}");
            if report.passes() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(CONFIG)
            }
        }
        Err(e) => config_error(e),
    }
}
