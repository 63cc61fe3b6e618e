//! Protocol layer of a layer-2 post-quantum hardening scheme for
//! permissioned Ethereum networks.

pub mod cert;
pub mod codec;
pub mod did;
pub mod entropy;
pub mod metatx;
pub mod rlp;
pub mod sim;
pub mod tunnel;
pub mod tx;
pub mod verify;
pub mod wire;
