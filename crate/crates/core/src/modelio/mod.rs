//! Model I/O: wire protocol, response cache, mock backends and the oracle world.

pub mod cache;
pub mod mock;
pub mod oracle;
pub mod protocol;
