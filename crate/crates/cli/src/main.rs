use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rehost_core::container::{self, FirmwareImage};
use rehost_core::disasm;
use rehost_core::emu::ImageView;
use rehost_core::functions::KernelAnalysis;
use rehost_core::identify::{self, PointerCatalog, Resolution, SlotRecipe, Unresolved};
use rehost_core::mmu;
use rehost_core::pipeline::{self, PipelineOptions};
use rehost_core::transplant::{self, DriverObject, PatchSet, Thunk};
use rehost_core::Execution;

#[derive(Parser)]
#[command(name = "rehost", version, about = "Prepare stripped ARM Linux kernels for driver transplantation")]
struct Cli {
    /// Run every data-parallel stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List embedded containers and carve out the validated ones.
    Unpack {
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inflate a zImage or uImage and recover its load base.
    Decompress {
        blob: PathBuf,
        #[arg(long, value_parser = parse_hex)]
        load_base: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover function boundaries and features from a flat kernel.
    Functions {
        kernel: PathBuf,
        #[command(flatten)]
        kopts: KernelOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve catalogued pointers in a flat kernel.
    Identify {
        kernel: PathBuf,
        #[command(flatten)]
        kopts: KernelOpts,
        /// Pointer catalog (TOML); the built-in catalog when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        version: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebase a driver, bind its imports and plan the forward-pointer patches.
    Fixup {
        /// Resolution report written by `identify`.
        resolution: PathBuf,
        #[arg(long)]
        driver: PathBuf,
        /// Defaults to the opaque base.
        #[arg(long, value_parser = parse_hex)]
        load_addr: Option<u32>,
        #[arg(long, value_parser = parse_hex)]
        machine_desc_addr: Option<u32>,
        /// Flat kernel, needed when a slot is reached through a pointer.
        #[arg(long)]
        kernel: Option<PathBuf>,
        #[command(flatten)]
        opaque: OpaqueOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an address-translation scenario and print its transcript.
    SimulateMmu {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Firmware image to resolved pointers and a patched driver.
    Pipeline {
        image: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        driver: Option<PathBuf>,
        #[arg(long, value_parser = parse_hex)]
        load_base: Option<u32>,
        #[arg(long)]
        version: Option<String>,
        #[arg(long, value_parser = parse_hex)]
        machine_desc_addr: Option<u32>,
        #[command(flatten)]
        opaque: OpaqueOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump one line per instruction: address, word, class, branch targets.
    Disasm {
        file: PathBuf,
        #[command(flatten)]
        kopts: KernelOpts,
        #[arg(long, value_parser = parse_hex)]
        start: Option<u32>,
        #[arg(long)]
        count: Option<usize>,
    },
}

#[derive(Args)]
struct KernelOpts {
    #[arg(long, value_parser = parse_hex, default_value = "0xc0008000")]
    load_base: u32,
}

#[derive(Args)]
struct OpaqueOpts {
    #[arg(long, value_parser = parse_hex, default_value = "0xd0000000")]
    opaque_base: u32,
    #[arg(long, value_parser = parse_hex, default_value = "0x10000")]
    opaque_len: u32,
}

fn parse_hex(s: &str) -> Result<u32, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u32::from_str_radix(&digits.replace('_', ""), 16).map_err(|e| format!("{s:?} is not a 32-bit hex value: {e}"))
}

/// A failure reported as one JSON record on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Failure { kind, message: message.to_string() }
    }
}

impl From<pipeline::PipelineError> for Failure {
    fn from(e: pipeline::PipelineError) -> Self {
        Failure::new(e.kind(), e)
    }
}

type Res<T> = Result<T, Failure>;

fn read(path: &Path) -> Res<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

/// Temp file in the destination directory, then rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Res<()> {
    let io = |e: std::io::Error| Failure::new("io", format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("reports serialize");
    s.push(b'\n');
    s
}

/// Writes `bytes` to `out/name`, or to stdout without `--out`.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Res<()> {
    match out {
        Some(dir) => write_atomic(dir, name, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::new("io", e)),
    }
}

fn load_catalog(path: Option<&Path>) -> Res<PointerCatalog> {
    match path {
        Some(p) => PointerCatalog::load(p).map_err(|e| Failure::new("catalog", e)),
        None => Ok(PointerCatalog::builtin()),
    }
}

fn load_driver(path: &Path) -> Res<DriverObject> {
    DriverObject::from_bytes(&read(path)?).map_err(|e| Failure::new("driver", e))
}

fn analyze(path: &Path, load_base: u32, exec: Execution) -> Res<KernelAnalysis> {
    KernelAnalysis::new_with(read(path)?, load_base, exec).map_err(|e| Failure::new("disasm", e))
}

#[derive(Serialize)]
struct RegionRecord {
    offset: usize,
    kind: container::RegionKind,
    confidence: container::Confidence,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_unpack(image: &Path, out: &Path, exec: Execution) -> Res<()> {
    let fw = FirmwareImage::new(read(image)?, image.display().to_string()).map_err(|e| Failure::new("container", e))?;
    let mut records = Vec::new();
    for r in container::scan_signatures_with(&fw, exec) {
        let mut rec = RegionRecord { offset: r.offset, kind: r.kind, confidence: r.confidence, file: None, size: None, error: None };
        if r.is_validated() {
            match container::extract_kernel(&fw, &r) {
                Ok(blob) => {
                    let name = format!("region_{:08x}.{}", r.offset, r.kind.extension());
                    write_atomic(out, &name, &blob.bytes)?;
                    rec.file = Some(name);
                    rec.size = Some(blob.bytes.len());
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
        }
        records.push(rec);
    }
    write_atomic(out, "regions.json", &json(&records))
}

#[derive(Serialize)]
struct SourceOffsets {
    blob: usize,
    stream: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    decompress_call: Option<u32>,
}

#[derive(Serialize)]
struct KernelSidecar {
    load_base: u32,
    load_base_source: pipeline::LoadBaseSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_start: Option<u32>,
    version: Option<String>,
    codec: container::RegionKind,
    container: container::RegionKind,
    size: usize,
    source_offsets: SourceOffsets,
}

fn cmd_decompress(blob: &Path, load_base: Option<u32>, out: &Path) -> Res<()> {
    let fw = FirmwareImage::new(read(blob)?, blob.display().to_string()).map_err(|e| Failure::new("container", e))?;
    let k = pipeline::unpack_kernel(&fw, load_base)?;
    let sidecar = KernelSidecar {
        load_base: k.image.load_base,
        load_base_source: k.load_base_source,
        output_start: k.output_start,
        version: k.image.version.clone(),
        codec: k.image.codec,
        container: k.container,
        size: k.image.bytes.len(),
        source_offsets: SourceOffsets { blob: k.blob_offset, stream: k.image.stream_offset, decompress_call: k.call_site },
    };
    write_atomic(out, "kernel.bin", &k.image.bytes)?;
    write_atomic(out, "kernel.json", &json(&sidecar))
}

#[derive(Serialize)]
struct FunctionRecord {
    entry: u32,
    end: u32,
    size: u32,
    bb_count: usize,
    callee_count: usize,
    caller_count: usize,
    string_ref_count: usize,
}

#[derive(Serialize)]
struct FunctionReport {
    load_base: u32,
    size: usize,
    function_count: usize,
    functions: Vec<FunctionRecord>,
}

fn cmd_functions(kernel: &Path, k: &KernelOpts, out: Option<&Path>, exec: Execution) -> Res<()> {
    let a = analyze(kernel, k.load_base, exec)?;
    let functions: Vec<FunctionRecord> = a
        .functions
        .iter()
        .map(|f| FunctionRecord {
            entry: f.entry,
            end: f.end,
            size: f.size(),
            bb_count: f.bb_count,
            callee_count: f.callees.len(),
            caller_count: f.callers.len(),
            string_ref_count: f.string_refs.len(),
        })
        .collect();
    let report = FunctionReport { load_base: a.base, size: a.bytes.len(), function_count: functions.len(), functions };
    emit(out, "functions.json", &json(&report))
}

/// What `identify` writes and `fixup` reads.
#[derive(Serialize, Deserialize)]
struct IdentifyReport {
    version: Option<String>,
    load_base: u32,
    resolutions: BTreeMap<String, Resolution>,
    unresolved: BTreeMap<String, Unresolved>,
    slots: Vec<SlotRecipe>,
}

fn cmd_identify(kernel: &Path, k: &KernelOpts, catalog: Option<&Path>, version: Option<String>, out: Option<&Path>, exec: Execution) -> Res<()> {
    let catalog = load_catalog(catalog)?;
    let a = analyze(kernel, k.load_base, exec)?;
    let version = version.or_else(|| rehost_core::decompress::detect_kernel_version(&a.bytes));
    let resolved = identify::identify_pointers_with(&a, &catalog, version.as_deref(), exec);
    let slots = identify::derive_data_slots(&resolved, &catalog).unwrap_or_default();
    let report = IdentifyReport {
        version: resolved.version.clone(),
        load_base: k.load_base,
        resolutions: resolved.resolutions,
        unresolved: resolved.unresolved,
        slots,
    };
    emit(out, "resolution.json", &json(&report))
}

#[derive(Serialize)]
struct FixupReport {
    load_addr: u32,
    image_size: usize,
    code_len: u32,
    bss_size: u32,
    entry_map: BTreeMap<String, u32>,
    thunks: Vec<Thunk>,
    forward_patches: usize,
}

fn resolved_from(report: &IdentifyReport) -> identify::ResolvedCatalog {
    identify::ResolvedCatalog { version: report.version.clone(), resolutions: report.resolutions.clone(), unresolved: report.unresolved.clone() }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixup(
    resolution: &Path,
    driver: &Path,
    load_addr: Option<u32>,
    machine_desc: Option<u32>,
    kernel: Option<&Path>,
    opaque: &OpaqueOpts,
    out: &Path,
) -> Res<()> {
    let report: IdentifyReport = serde_json::from_str(&read_text(resolution)?).map_err(|e| Failure::new("resolution", format!("{}: {e}", resolution.display())))?;
    let drv = load_driver(driver)?;
    let load_addr = load_addr.unwrap_or(opaque.opaque_base);
    let patched = transplant::fixup(&drv, load_addr, &resolved_from(&report), opaque.opaque_len).map_err(|e| Failure::new("transplant", e))?;
    let forward = match machine_desc {
        Some(desc) => {
            let bytes = kernel.map(read).transpose()?;
            let view = bytes.as_deref().map(|b| ImageView::new(report.load_base, b));
            let mem = view.as_ref().map(|v| v as &dyn rehost_core::emu::LiteralMemory);
            transplant::plan_forward_install(&report.slots, desc, &patched.entry_map, mem).map_err(|e| Failure::new("transplant", e))?
        }
        None => PatchSet::default(),
    };
    let summary = FixupReport {
        load_addr,
        image_size: patched.image.len(),
        code_len: patched.code_len,
        bss_size: patched.bss_size,
        entry_map: patched.entry_map.clone(),
        thunks: patched.thunks.clone(),
        forward_patches: forward.len(),
    };
    write_atomic(out, "ECMO_Driver.bin", &patched.image)?;
    write_atomic(out, "patchset.jsonl", forward.to_jsonl().as_bytes())?;
    write_atomic(out, "fixup.json", &json(&summary))
}

fn cmd_simulate_mmu(scenario: &Path, out: Option<&Path>) -> Res<()> {
    let text = read_text(scenario)?;
    let dir = scenario.parent().map(Path::to_path_buf).unwrap_or_default();
    let transcript = mmu::run_scenario(&text, &|p| std::fs::read(dir.join(p))).map_err(|e| Failure::new("scenario", e))?;
    emit(out, "transcript.txt", transcript.as_bytes())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    image: &Path,
    catalog: Option<&Path>,
    driver: Option<&Path>,
    load_base: Option<u32>,
    version: Option<String>,
    machine_desc_addr: Option<u32>,
    opaque: &OpaqueOpts,
    out: Option<&Path>,
    exec: Execution,
) -> Res<()> {
    let fw = FirmwareImage::new(read(image)?, image.display().to_string()).map_err(|e| Failure::new("container", e))?;
    let catalog = load_catalog(catalog)?;
    let drv = driver.map(load_driver).transpose()?;
    let opts = PipelineOptions {
        load_base,
        version,
        machine_desc_addr,
        opaque_base: Some(opaque.opaque_base),
        opaque_len: Some(opaque.opaque_len),
        exec,
    };
    let result = pipeline::run(&fw, &catalog, drv.as_ref(), &opts)?;
    if let Some(dir) = out {
        if let Some(p) = &result.driver {
            write_atomic(dir, "ECMO_Driver.bin", &p.image)?;
            write_atomic(dir, "patchset.jsonl", result.forward.to_jsonl().as_bytes())?;
        }
    }
    emit(out, "report.json", &json(&result.report))
}

fn cmd_disasm(file: &Path, k: &KernelOpts, start: Option<u32>, count: Option<usize>) -> Res<()> {
    let bytes = read(file)?;
    let code = &bytes[..bytes.len() & !3];
    let instrs = disasm::linear_sweep(code, k.load_base).map_err(|e| Failure::new("disasm", e))?;
    let from = start.map_or(0, |s| (s.saturating_sub(k.load_base) / 4) as usize);
    let mut out = String::new();
    for i in instrs.iter().skip(from).take(count.unwrap_or(usize::MAX)) {
        let targets: Vec<String> = i.branch_targets.iter().map(|t| format!("{t:08x}")).collect();
        let targets = if targets.is_empty() { "-".to_string() } else { targets.join(",") };
        out.push_str(&format!("{:08x} {:08x} {} {}\n", i.addr, i.word, i.klass.as_str(), targets));
    }
    std::io::stdout().write_all(out.as_bytes()).map_err(|e| Failure::new("io", e))
}

fn run(cli: Cli) -> Res<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.cmd {
        Command::Unpack { image, out } => cmd_unpack(&image, &out, exec),
        Command::Decompress { blob, load_base, out } => cmd_decompress(&blob, load_base, &out),
        Command::Functions { kernel, kopts, out } => cmd_functions(&kernel, &kopts, out.as_deref(), exec),
        Command::Identify { kernel, kopts, catalog, version, out } => cmd_identify(&kernel, &kopts, catalog.as_deref(), version, out.as_deref(), exec),
        Command::Fixup { resolution, driver, load_addr, machine_desc_addr, kernel, opaque, out } => {
            cmd_fixup(&resolution, &driver, load_addr, machine_desc_addr, kernel.as_deref(), &opaque, &out)
        }
        Command::SimulateMmu { scenario, out } => cmd_simulate_mmu(&scenario, out.as_deref()),
        Command::Pipeline { image, catalog, driver, load_base, version, machine_desc_addr, opaque, out } => cmd_pipeline(
            &image,
            catalog.as_deref(),
            driver.as_deref(),
            load_base,
            version,
            machine_desc_addr,
            &opaque,
            out.as_deref(),
            exec,
        ),
        Command::Disasm { file, kopts, start, count } => cmd_disasm(&file, &kopts, start, count),
    }
}

fn report_failure(f: &Failure) {
    let rec = serde_json::json!({ "error": { "kind": f.kind, "message": f.message } });
    eprintln!("{rec}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_failure(&Failure::new("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report_failure(&f);
            ExitCode::FAILURE
        }
    }
}
