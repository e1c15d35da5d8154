//! Prize-collecting Steiner trees under a budget and a hop limit, solved
//! through a partial-ordering integer program.

pub mod bnb;
pub mod corpus;
pub mod instance;
pub mod model;
pub mod pop;
pub mod reduce;
pub mod simplex;
pub mod solve;
pub mod verify;
