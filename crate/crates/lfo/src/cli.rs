//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 domain error (one JSON object on stderr), 2 usage
//! error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use lfo_core::contact::{classify_state, feasible_cone_of, ContactElement};
use lfo_core::decoder::{run_program, verify_postconditions, ExecutionTrace, FrameStatus, SimConfig};
use lfo_core::encoder::{encode, parse_recording, EncoderConfig};
use lfo_core::grasp::{
    check_force_closure, compute_contact_web, fit_superquadric, random_view, sample_cloud, ClosureType, GripperSpec,
    RandomizationRanges, SuperquadricParams,
};
use lfo_core::laban::serialize_score;
use lfo_core::taskmodel::{parse_program, to_canonical, validate_program, violations_error};
use lfo_core::{Error, Result};

use crate::inputs::{format_cloud, load_robot, load_world, parse_cloud, read_text};
use crate::service::error_json;
use crate::session::Session;

#[derive(Parser, Debug)]
#[command(name = "lfo", version, about = "Encode demonstrations into task programs and run them on simulated robots")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a recording into a validated program.
    Encode {
        recording: PathBuf,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a program file against the grammar and slot rules.
    Validate { program: PathBuf },
    /// Print the posture score of a recording, one row per stop.
    Laban {
        recording: PathBuf,
        /// Print the score as JSON instead of score text.
        #[arg(long)]
        json: bool,
    },
    /// Superquadric shape models.
    #[command(subcommand)]
    Sq(SqCommand),
    /// Contact-state analysis.
    #[command(subcommand)]
    Contact(ContactCommand),
    /// Run a program in a world on a robot.
    Simulate {
        program: PathBuf,
        /// World file or bundled world name.
        world: String,
        /// Robot file or bundled robot name.
        robot: String,
        /// Write the execution trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check a trace against the program it ran.
    Verify {
        trace: PathBuf,
        program: PathBuf,
        /// World whose supports resolve contact classes; defaults to the final
        /// world in the trace.
        #[arg(long)]
        world: Option<String>,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory holding `<id>.rec.json` recordings and their edit logs.
        #[arg(long, env = "LFO_DATA_DIR", default_value = ".")]
        data_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum SqCommand {
    /// Fit a superquadric to a point cloud (`x y z` per line).
    Fit { cloud: PathBuf },
    /// Draw a random shape and print a partial view of it as a point cloud.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        points: usize,
        /// Gaussian noise along the normal, meters.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Place a contact web on a shape and test force closure.
    Web {
        /// passive-form, passive-force or active-force.
        #[arg(long)]
        closure: String,
        /// Shape parameters as JSON; a random shape from `--seed` otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
    },
}

#[derive(Subcommand, Debug)]
enum ContactCommand {
    /// Classify each contact configuration in a scenario file.
    Classify { file: PathBuf },
}

/// One entry of a scenario file: `[{"name": .., "contacts": [{"normal": [x, y, z]}, ..]}, ..]`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Scenario {
    name: String,
    contacts: Vec<ContactElement<f64>>,
}

/// Domain failure: what goes to stderr plus an optional report for stdout.
struct Failure {
    error: Value,
    report: Option<String>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { error: error_json(&e), report: None }
    }
}

fn json_line(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

fn parse_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse { line: inner.line(), message: inner.to_string() }
        } else {
            Error::Schema { path, message: inner.to_string() }
        }
    })
}

fn write_or_print(output: Option<&Path>, text: &str) -> Result<Option<String>> {
    match output {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            Ok(None)
        }
        None => Ok(Some(text.to_string())),
    }
}

fn execute(cmd: Command) -> std::result::Result<Option<String>, Failure> {
    match cmd {
        Command::Encode { recording, output } => {
            let rec = parse_recording(&read_text(&recording)?)?;
            let enc = encode(&rec, &EncoderConfig::default())?;
            Ok(write_or_print(output.as_deref(), &to_canonical(&enc.program))?)
        }
        Command::Validate { program } => {
            let p = parse_program(&read_text(&program)?)?;
            match validate_program(&p) {
                Ok(()) => Ok(Some(json_line(&json!({"ok": true, "frames": p.frames.len()})))),
                Err(v) => {
                    let mut error = error_json(&violations_error(&v));
                    error["violations"] = json!(v);
                    Err(Failure { error, report: None })
                }
            }
        }
        Command::Laban { recording, json } => {
            let rec = parse_recording(&read_text(&recording)?)?;
            let session = Session::from_recording(&rec.id.clone(), recording, rec)?;
            let score = session.laban()?;
            Ok(Some(if json { json_line(&score) } else { serialize_score(&score) }))
        }
        Command::Sq(SqCommand::Fit { cloud }) => {
            let pts = parse_cloud(&read_text(&cloud)?)?;
            Ok(Some(json_line(&fit_superquadric(&pts)?)))
        }
        Command::Sq(SqCommand::Gen { seed, points, noise }) => {
            let ranges = RandomizationRanges::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = SuperquadricParams::<f64>::random(&mut rng, &ranges);
            let (az, zen) = random_view(&mut rng, &ranges);
            let cloud = sample_cloud(&q, az, zen, points, noise, seed)?;
            let header = json!({"params": q, "view_azimuth_deg": az, "view_zenith_deg": zen});
            Ok(Some(format!("# {header}\n{}", format_cloud(&cloud))))
        }
        Command::Sq(SqCommand::Web { closure, params, seed, mu }) => {
            let closure: ClosureType = serde_json::from_value(Value::String(closure.clone()))
                .map_err(|_| Error::invalid(format!("unknown closure `{closure}`")))?;
            let q: SuperquadricParams<f64> = match params {
                Some(p) => parse_json_file(&p)?,
                None => SuperquadricParams::random(&mut ChaCha8Rng::seed_from_u64(seed), &RandomizationRanges::default()),
            };
            let web = compute_contact_web(&q, closure, &GripperSpec::default())?;
            let closed = check_force_closure(&web, mu, 8)?;
            Ok(Some(json_line(&json!({"params": q, "web": web, "force_closure": closed}))))
        }
        Command::Contact(ContactCommand::Classify { file }) => {
            let scenarios: Vec<Scenario> = parse_json_file(&file)?;
            let mut out = Vec::with_capacity(scenarios.len());
            for s in scenarios {
                let cone = feasible_cone_of(&s.contacts).map_err(|e| Error::invalid(format!("{}: {e}", s.name)))?;
                out.push(json!({
                    "name": s.name,
                    "class": classify_state(&cone),
                    "span_dim": cone.span_dim,
                    "lineality_dim": cone.lineality_dim,
                    "generators": cone.generators,
                }));
            }
            Ok(Some(json_line(&out)))
        }
        Command::Simulate { program, world, robot, trace } => {
            let p = parse_program(&read_text(&program)?)?;
            let w = load_world(&world)?;
            let r = load_robot(&robot)?;
            let out = run_program(&p, &w, &r, &SimConfig::default())?;
            if let Some(path) = &trace {
                std::fs::write(path, out.trace.to_ndjson()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            }
            let verification = verify_postconditions(&out.trace, &p, &w);
            let summary = json_line(&json!({
                "program": p.provenance,
                "world": w.name,
                "robot": r.name,
                "completed": out.error.is_none(),
                "frames_executed": out.trace.terminations().count(),
                "final_world": out.world,
                "verification": verification,
            }));
            match out.error {
                None => Ok(Some(summary)),
                Some(e) => Err(Failure { error: error_json(&e), report: Some(summary) }),
            }
        }
        Command::Verify { trace, program, world } => {
            let t = ExecutionTrace::from_ndjson(&read_text(&trace)?)?;
            let p = parse_program(&read_text(&program)?)?;
            let w = match (world, t.final_world()) {
                (Some(arg), _) => load_world(&arg)?,
                (None, Some(w)) => w.clone(),
                (None, None) => {
                    let name = t.header().map(|h| h.world.clone()).unwrap_or_default();
                    load_world(&name).map_err(|_| Error::invalid("trace has no final world; pass --world"))?
                }
            };
            let report = verify_postconditions(&t, &p, &w);
            let text = json_line(&report);
            if report.passed {
                Ok(Some(text))
            } else {
                let failed: Vec<usize> = report.frames.iter().filter(|f| f.status != FrameStatus::Pass).map(|f| f.frame).collect();
                Err(Failure {
                    error: json!({"error": "verification", "message": format!("frames {failed:?} did not pass"), "frames": failed}),
                    report: Some(text),
                })
            }
        }
        Command::Serve { port, data_dir } => {
            let rt = tokio::runtime::Runtime::new().map_err(Error::from)?;
            rt.block_on(crate::service::serve(port, &data_dir))?;
            Ok(None)
        }
    }
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
            return code;
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            if let Some(t) = text {
                let _ = out.write_all(t.as_bytes());
            }
            0
        }
        Err(f) => {
            if let Some(r) = f.report {
                let _ = out.write_all(r.as_bytes());
            }
            let _ = writeln!(err, "{}", f.error);
            1
        }
    }
}
