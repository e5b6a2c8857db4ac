//! Static tooling for rehosting stripped embedded ARM Linux kernels.
//!
//! The crate covers the whole offline half of the workflow:
//!
//! * [`container`] finds compressed kernels and U-Boot legacy images inside firmware dumps,
//! * [`decompress`] recognises the `head.S` decompressor call and inflates the payload,
//! * [`disasm`], [`functions`] and [`emu`] turn the flat kernel into function candidates,
//! * [`identify`] resolves catalogued kernel functions in the stripped binary,
//! * [`transplant`] rebases and binds a position-zero driver against the resolved kernel,
//! * [`mmu`] models the hijacked page-table walk that keeps the driver invisible to the guest.
//!
//! Hot loops run on rayon when the `parallel` feature is enabled (the default) and fall back to
//! plain iterators otherwise; every entry point that fans out also has a `*_with` variant taking
//! an explicit [`Execution`] so both paths can be compared side by side.

pub mod container;
pub mod decompress;
pub mod disasm;
pub mod emu;
pub mod functions;
pub mod identify;
pub mod mmu;
pub mod pipeline;
pub mod transplant;

mod exec;

pub use exec::Execution;
