pub mod gmsk;
pub mod header;
pub mod hop;
pub mod packet;
