//! Helper-assisted dishonest-majority MPC over Z_{2^{l+s}} with MAC-authenticated
//! masked shares, a simulated synchronous network, and secure CNN layers.

pub mod bench;
pub mod net;
pub mod nn;
pub mod oracle;
pub mod preprocessing;
pub mod prf;
pub mod protocols;
pub mod ring;

pub use net::{CostLedger, NetworkProfile, Phase, Role, TamperPolicy};
pub use protocols::{Session, SessionConfig, Wire};
pub use ring::{FixedPoint, RingElement, RingParams};
