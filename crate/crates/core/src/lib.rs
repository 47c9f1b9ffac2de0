//! Decentralized runtime verification: LTL3 monitor synthesis, execution
//! history encodings, and a round-based simulator for hierarchies of monitors.

pub mod bundled;
pub mod ehe;
pub mod eval;
pub mod expr;
pub mod ltl;
pub mod memory;
pub mod oracle;
pub mod registry;
pub mod report;
pub mod sim;
pub mod synthesis;
pub mod trace;

pub use ehe::{Condition, Ehe, MonitorTables, Trigger};
pub use expr::{Atom, Expr, Round, SimplifyStats};
pub use ltl::{parse, Formula, Verdict};
pub use memory::Memory;
pub use registry::{Registry, RegistryError};
pub use sim::{simulate, DeliveryPolicy, Report, SimConfig, SimError};
pub use synthesis::{synthesize, MooreMonitor, SynthConfig, SynthError};
pub use trace::ObservationTrace;
