//! End-to-end driver: firmware image in, resolved pointers and a patched driver out.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::container::{self, ContainerError, EmbeddedRegion, FirmwareImage, KernelBlob, RegionKind};
use crate::decompress::{self, DecompressError, KernelImage};
use crate::disasm::{self, DisasmError};
use crate::emu::{ImageView, RegisterState};
use crate::exec::Execution;
use crate::functions::KernelAnalysis;
use crate::identify::{self, IdentifyError, PointerCatalog, ResolvedCatalog, SlotRecipe, Strategy};
use crate::mmu::{self, AddressSpace, MmuError};
use crate::transplant::{self, DriverObject, PatchSet, PatchedDriver, TransplantError};

/// Kernel virtual base on the 3G/1G split every in-scope board uses.
pub const PAGE_OFFSET: u32 = 0xc000_0000;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Decompress(#[from] DecompressError),
    #[error(transparent)]
    Disasm(#[from] DisasmError),
    #[error(transparent)]
    Identify(#[from] IdentifyError),
    #[error(transparent)]
    Transplant(#[from] TransplantError),
    #[error(transparent)]
    Mmu(#[from] MmuError),
}

impl PipelineError {
    /// Stable snake_case name for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Container(_) => "container",
            PipelineError::Decompress(_) => "decompress",
            PipelineError::Disasm(_) => "disasm",
            PipelineError::Identify(_) => "identify",
            PipelineError::Transplant(_) => "transplant",
            PipelineError::Mmu(_) => "mmu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadBaseSource {
    Operator,
    /// From `output_start` at the decompressor call.
    Stub,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnpackedKernel {
    pub image: KernelImage,
    pub load_base_source: LoadBaseSource,
    /// Physical `output_start` when the stub gave it away.
    pub output_start: Option<u32>,
    pub call_site: Option<u32>,
    /// Offset of the zImage inside the firmware.
    pub blob_offset: usize,
    pub container: RegionKind,
}

/// Maps a physical `output_start` to the kernel's virtual link address. TEXT_OFFSET is below
/// 1 MiB and PHYS_OFFSET is megabyte aligned, so the offset within the megabyte carries over.
pub fn virtual_load_base(output_start: u32) -> u32 {
    if output_start >= PAGE_OFFSET {
        output_start
    } else {
        PAGE_OFFSET | (output_start & 0x000f_ffff)
    }
}

/// The stub before the stream: where it calls the decompressor and what r0 holds there.
fn stub_output_start(blob: &[u8], stream_offset: usize) -> (Option<u32>, Option<u32>) {
    let code = &blob[..stream_offset & !3];
    let Ok(instrs) = disasm::linear_sweep(code, 0) else {
        return (None, None);
    };
    let Ok(call) = decompress::locate_decompress_call(&instrs) else {
        return (None, None);
    };
    let view = ImageView::new(0, blob);
    let r0 = decompress::recover_output_start(&instrs, call, Some(&view), RegisterState::unknown()).ok();
    (Some(call), r0)
}

/// Finds the kernel in a firmware image and inflates it.
///
/// Validated uImages are unwrapped first; otherwise the whole image is searched for a stream.
/// `load_base` overrides whatever the stub says.
pub fn unpack_kernel(fw: &FirmwareImage, load_base: Option<u32>) -> Result<UnpackedKernel, PipelineError> {
    let regions = container::scan_signatures(fw);
    let mut blobs: Vec<KernelBlob> = Vec::new();
    for r in regions.iter().filter(|r| r.kind == RegionKind::Uimage && r.is_validated()) {
        if let Ok(b) = container::extract_kernel(fw, r) {
            blobs.push(b);
        }
    }
    blobs.push(KernelBlob::from_bytes(fw.bytes().to_vec()));

    let mut last = None;
    for blob in blobs {
        match decompress::decompress_payload(&blob) {
            Ok(mut image) => {
                let (call_site, output_start) = stub_output_start(&blob.bytes, image.stream_offset);
                let source = match (load_base, output_start) {
                    (Some(b), _) => {
                        image.load_base = b;
                        LoadBaseSource::Operator
                    }
                    (None, Some(o)) => {
                        image.load_base = virtual_load_base(o);
                        LoadBaseSource::Stub
                    }
                    (None, None) => LoadBaseSource::Default,
                };
                let blob_offset = if blob.source_region.kind == RegionKind::Uimage { blob.source_region.offset + 64 } else { 0 };
                return Ok(UnpackedKernel {
                    image,
                    load_base_source: source,
                    output_start,
                    call_site,
                    blob_offset,
                    container: blob.source_region.kind,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or(DecompressError::NoCompressedStream).into())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    pub load_base: Option<u32>,
    pub version: Option<String>,
    pub machine_desc_addr: Option<u32>,
    pub opaque_base: Option<u32>,
    pub opaque_len: Option<u32>,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImageStats {
    pub firmware_size: usize,
    pub regions: Vec<EmbeddedRegion>,
    pub container: RegionKind,
    pub codec: RegionKind,
    pub stream_offset: usize,
    pub decompressed_size: usize,
    pub load_base: u32,
    pub load_base_source: LoadBaseSource,
    pub version: Option<String>,
    pub function_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolutionSummary {
    pub applicable: usize,
    pub resolved: usize,
    pub by_strategy: BTreeMap<Strategy, usize>,
    pub unresolved: Vec<String>,
    pub slots: Vec<SlotRecipe>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchSummary {
    pub load_addr: u32,
    pub image_size: usize,
    pub imports_bound: usize,
    pub calls_direct: usize,
    pub calls_thunked: usize,
    /// Zero until a machine descriptor address is supplied.
    pub forward_patches: usize,
    pub phys_unchanged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub unpack_ms: f64,
    pub functions_ms: f64,
    pub identify_ms: f64,
    pub fixup_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub image: ImageStats,
    pub resolution: ResolutionSummary,
    pub patch: Option<PatchSummary>,
    pub timing: Timing,
}

/// Everything a pipeline run produces, report included.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub kernel: UnpackedKernel,
    pub resolved: ResolvedCatalog,
    pub driver: Option<PatchedDriver>,
    pub forward: PatchSet,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run(fw: &FirmwareImage, catalog: &PointerCatalog, driver: Option<&DriverObject>, opts: &PipelineOptions) -> Result<PipelineOutput, PipelineError> {
    let t = Instant::now();
    let regions = container::scan_signatures_with(fw, opts.exec);
    let kernel = unpack_kernel(fw, opts.load_base)?;
    let unpack_ms = ms(t);

    let t = Instant::now();
    let base = kernel.image.load_base;
    let analysis = KernelAnalysis::new_with(kernel.image.bytes.clone(), base, opts.exec)?;
    let functions_ms = ms(t);

    let t = Instant::now();
    let version = opts.version.clone().or_else(|| kernel.image.version.clone());
    let resolved = identify::identify_pointers_with(&analysis, catalog, version.as_deref(), opts.exec);
    let slots = identify::derive_data_slots(&resolved, catalog).unwrap_or_default();
    let identify_ms = ms(t);

    let mut by_strategy = BTreeMap::new();
    for r in resolved.resolutions.values() {
        *by_strategy.entry(r.strategy_used).or_insert(0) += 1;
    }
    let resolution = ResolutionSummary {
        applicable: resolved.resolutions.len() + resolved.unresolved.len(),
        resolved: resolved.resolutions.len(),
        by_strategy,
        unresolved: resolved.unresolved.keys().cloned().collect(),
        slots: slots.clone(),
    };

    let t = Instant::now();
    let opaque_base = opts.opaque_base.unwrap_or(mmu::DEFAULT_OPAQUE_BASE);
    let opaque_len = opts.opaque_len.unwrap_or(mmu::DEFAULT_OPAQUE_LEN);
    let mut patched = None;
    let mut forward = PatchSet::default();
    let mut patch = None;
    if let Some(drv) = driver {
        let p = transplant::fixup(drv, opaque_base, &resolved, opaque_len)?;
        if let Some(desc) = opts.machine_desc_addr {
            let view = ImageView::new(base, &kernel.image.bytes);
            forward = transplant::plan_forward_install(&slots, desc, &p.entry_map, Some(&view))?;
        }
        // the kernel mapped by one section per megabyte, as head.S leaves it
        let mut space = AddressSpace::new(0x4000, opaque_base, opaque_len)?;
        for mb in 0..(kernel.image.bytes.len() as u32).div_ceil(mmu::SECTION) + 1 {
            space.set_section((base & !(mmu::SECTION - 1)) + mb * mmu::SECTION, mb * mmu::SECTION, mmu::Perms::RWX);
        }
        let before = space.phys.digest();
        space.load_driver(&p)?;
        let calls = drv.relocs.iter().filter(|r| r.kind == transplant::RelocKind::Call24).count();
        patch = Some(PatchSummary {
            load_addr: p.load_addr,
            image_size: p.image.len(),
            imports_bound: drv.imports.len(),
            calls_direct: calls - p.thunks.len(),
            calls_thunked: p.thunks.len(),
            forward_patches: forward.len(),
            phys_unchanged: space.phys.digest() == before,
        });
        patched = Some(p);
    }
    let fixup_ms = ms(t);

    let report = PipelineReport {
        image: ImageStats {
            firmware_size: fw.len(),
            regions,
            container: kernel.container,
            codec: kernel.image.codec,
            stream_offset: kernel.image.stream_offset,
            decompressed_size: kernel.image.bytes.len(),
            load_base: base,
            load_base_source: kernel.load_base_source,
            version: kernel.image.version.clone(),
            function_count: analysis.functions.len(),
        },
        resolution,
        patch,
        timing: Timing { unpack_ms, functions_ms, identify_ms, fixup_ms },
    };
    Ok(PipelineOutput { report, kernel, resolved, driver: patched, forward })
}
