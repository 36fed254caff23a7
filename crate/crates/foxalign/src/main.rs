//! Command-line frontend: reproducible runs of gradient checking, scene
//! synthesis, toy training, face parsing, evaluation, and the scaling
//! benchmark.
//!
//! Exit codes: 0 success, 1 pipeline/runtime failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use foxalign::bench::{self, BenchConfig};
use foxalign::loss;
use foxalign::meanshift::ClusterConfig;
use foxalign::nms::NmsConfig;
use foxalign::pipeline::{self, ToyTrainConfig};
use foxalign::tensor::{EmbeddingMap, Heatmap, Tensor};
use foxalign::types::{FaceGroup, FaceMask, LossConfig, SceneAnnotation};

#[derive(Parser)]
#[command(name = "foxalign", version, about = "Bottom-up multi-face alignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct LossArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.001)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    delta_v: f64,
    #[arg(long, default_value_t = 1.0)]
    delta_d: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 8)]
    embed_dim: usize,
}

impl LossArgs {
    fn to_config(&self) -> LossConfig {
        LossConfig {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta_v: self.delta_v,
            delta_d: self.delta_d,
            radius: self.radius,
            embed_dim: self.embed_dim,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Verify analytic loss gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, env = "FOX_SEED", default_value_t = 0)]
        seed: u64,
        /// Negative-control hook: perturb the analytic gradient so the
        /// check must fail.
        #[arg(long, hide = true, default_value_t = false)]
        corrupt_gradient: bool,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Generate a synthetic multi-face scene.
    Synth {
        #[arg(long, default_value_t = 3)]
        faces: usize,
        #[arg(long, default_value_t = 5)]
        landmarks: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, env = "FOX_SEED", default_value_t = 0)]
        seed: u64,
        /// Directory receiving heatmap.fxt1, mask.fxt1, annotation.json.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Train free per-pixel embeddings on a scene mask.
    TrainToy {
        /// Face mask tensor (face id per pixel, -1 background).
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, env = "FOX_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        loss: LossArgs,
        /// Output embedding map (FXT1, [D, H, W]).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Parse faces from a heatmap + embedding map pair.
    Parse {
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        #[arg(long, default_value_t = 1)]
        nms_radius: usize,
        #[arg(long, default_value_t = 1.0)]
        bandwidth: f64,
        #[arg(long)]
        merge_tolerance: Option<f64>,
        /// Output face groups JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Evaluate parsed faces against a scene annotation.
    Eval {
        /// Face groups JSON produced by `parse`.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        accept_frac: f64,
        /// Output report JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
    /// Runtime-scaling benchmark over face counts.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8, 16])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, env = "FOX_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        print_config: bool,
    },
}

fn print_config<T: Serialize>(cfg: &T) {
    println!("{}", serde_json::to_string_pretty(cfg).unwrap());
}

fn write_json<T: Serialize>(value: &T, path: &PathBuf) -> foxalign::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| foxalign::Error::Json {
        path: path.clone(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| foxalign::Error::Io {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> foxalign::Result<ExitCode> {
    match cli.command {
        Command::Gradcheck {
            n,
            dim,
            clusters,
            trials,
            seed,
            corrupt_gradient,
            print_config: dump,
        } => {
            if trials == 0 {
                eprintln!("error: --trials must be positive");
                return Ok(ExitCode::from(2));
            }
            if n < clusters || clusters == 0 || dim < 2 {
                eprintln!("error: need n >= clusters >= 1 and dim >= 2");
                return Ok(ExitCode::from(2));
            }
            // Margins below the defaults so both hinges are exercised on
            // random data.
            let cfg = LossConfig {
                delta_v: 0.5,
                delta_d: 0.9,
                embed_dim: dim,
                ..LossConfig::default()
            };
            if dump {
                print_config(&serde_json::json!({
                    "n": n, "dim": dim, "clusters": clusters, "trials": trials,
                    "seed": seed, "step": 1e-6, "tolerance": 1e-5, "loss": cfg,
                }));
                return Ok(ExitCode::SUCCESS);
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut worst: f64 = 0.0;
            let mut done = 0usize;
            while done < trials {
                let e = loss::random_instance(n, dim, clusters, &mut rng);
                if !loss::away_from_kinks(&e, &cfg, 1e-3)? {
                    continue;
                }
                let mut analytic = loss::fox_loss_grad(&e, &cfg)?;
                if corrupt_gradient {
                    analytic[0][0] += 1e-2;
                }
                let numeric = loss::finite_difference_grad(&e, &cfg, 1e-6)?;
                worst = worst.max(loss::max_relative_error(&analytic, &numeric));
                done += 1;
            }
            println!("gradcheck: {trials} trials, max relative error {worst:.3e}");
            Ok(if worst < 1e-5 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Synth {
            faces,
            landmarks,
            height,
            width,
            seed,
            out_dir,
            print_config: dump,
        } => {
            if dump {
                print_config(&serde_json::json!({
                    "faces": faces, "landmarks": landmarks,
                    "height": height, "width": width, "seed": seed,
                }));
                return Ok(ExitCode::SUCCESS);
            }
            let scene = pipeline::generate_scene(faces, landmarks, height, width, seed)?;
            std::fs::create_dir_all(&out_dir).map_err(|source| foxalign::Error::Io {
                path: out_dir.clone(),
                source,
            })?;
            scene
                .heatmap
                .values()
                .write_file(out_dir.join("heatmap.fxt1"))?;
            scene.face_mask.to_tensor().write_file(out_dir.join("mask.fxt1"))?;
            scene.annotation.write_file(out_dir.join("annotation.json"))?;
            println!(
                "wrote heatmap.fxt1, mask.fxt1, annotation.json ({faces} faces) to {}",
                out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainToy {
            mask,
            steps,
            learning_rate,
            seed,
            loss: loss_args,
            out,
            print_config: dump,
        } => {
            let cfg = ToyTrainConfig {
                steps,
                learning_rate,
                loss: loss_args.to_config(),
                seed,
            };
            if dump {
                print_config(&cfg);
                return Ok(ExitCode::SUCCESS);
            }
            let mask = FaceMask::from_tensor(&Tensor::read_file(&mask)?)?;
            let result = pipeline::train_mask_embeddings(&mask, &cfg)?;
            result.map.values().write_file(&out)?;
            if let Some(last) = result.loss_trace.last() {
                println!(
                    "trained {} steps: l_var {:.3e} l_dist {:.3e} l_reg {:.3e} l_fox {:.3e}",
                    steps, last.l_var, last.l_dist, last.l_reg, last.l_fox
                );
            } else {
                println!("trained 0 steps (seeded initialization written)");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Parse {
            heatmap,
            embeddings,
            threshold,
            nms_radius,
            bandwidth,
            merge_tolerance,
            out,
            print_config: dump,
        } => {
            let nms_cfg = NmsConfig {
                threshold,
                radius: nms_radius,
            };
            let cluster_cfg = ClusterConfig {
                bandwidth,
                merge_tolerance: merge_tolerance.unwrap_or(bandwidth / 2.0),
                ..ClusterConfig::default()
            };
            if dump {
                print_config(&serde_json::json!({
                    "nms": nms_cfg, "cluster": cluster_cfg,
                }));
                return Ok(ExitCode::SUCCESS);
            }
            let h = Heatmap::new(Tensor::read_file(&heatmap)?)?;
            let f = EmbeddingMap::new(Tensor::read_file(&embeddings)?)?;
            let groups = pipeline::parse_faces(&h, &f, &nms_cfg, &cluster_cfg)?;
            write_json(&groups, &out)?;
            println!("parsed {} face groups to {}", groups.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            pred,
            annotation,
            accept_frac,
            out,
            print_config: dump,
        } => {
            if dump {
                print_config(&serde_json::json!({ "accept_frac": accept_frac }));
                return Ok(ExitCode::SUCCESS);
            }
            let text = std::fs::read_to_string(&pred).map_err(|source| foxalign::Error::Io {
                path: pred.clone(),
                source,
            })?;
            let groups: Vec<FaceGroup> =
                serde_json::from_str(&text).map_err(|source| foxalign::Error::Json {
                    path: pred.clone(),
                    source,
                })?;
            let ann = SceneAnnotation::read_file(&annotation)?;
            let report = foxalign::metrics::evaluate(&groups, &ann, accept_frac)?;
            match out {
                Some(path) => write_json(&report, &path)?,
                None => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            counts,
            repeats,
            height,
            width,
            steps,
            seed,
            out_csv,
            out_json,
            print_config: dump,
        } => {
            let cfg = BenchConfig {
                face_counts: counts,
                repeats,
                height,
                width,
                seed,
                train: ToyTrainConfig {
                    steps,
                    seed,
                    ..ToyTrainConfig::default()
                },
                ..BenchConfig::default()
            };
            if dump {
                print_config(&cfg);
                return Ok(ExitCode::SUCCESS);
            }
            let report = bench::run_scaling(&cfg)?;
            println!("{}", report.to_csv());
            match report.slope_ms_per_face {
                Some(slope) => println!(
                    "fitted slope {slope:.4} ms/face, intercept {:.4} ms",
                    report.intercept_ms
                ),
                None => println!(
                    "slope undefined (single face count); intercept {:.4} ms",
                    report.intercept_ms
                ),
            }
            println!(
                "reference (GTX-1080ti, full network): slope {:.2} ms/face, \
                 parse {:.2} ms at 9 faces, {:.2} ms single face",
                report.reference_slope_ms_per_face,
                report.reference_parse_ms_9_faces,
                report.reference_single_face_ms
            );
            if let Some(path) = out_csv {
                std::fs::write(&path, report.to_csv()).map_err(|source| foxalign::Error::Io {
                    path: path.clone(),
                    source,
                })?;
            }
            if let Some(path) = out_json {
                write_json(&report, &path)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
