//! Rule-based right-of-way deconfliction between a human and autonomous
//! agents, with dialogue-game reasoning and contrastive explanations.

pub mod argumentation;
pub mod cli;
pub mod culture;
pub mod deconfliction;
pub mod dialogue;
pub mod explanation;
pub mod game;
pub mod server;
