//! Loads trained partners and registers one factory per agent name.

use morai_core::agents::{Agent, AgentError, LstmAgent, MarkovAgent, MarkovModel, RandomAgent, ShapeAgent, ShapeModel};
use morai_core::cnn::CnnModel;
use morai_core::session::SessionManager;

use crate::config::ServiceConfig;

/// Names accepted by `eval` and by `POST /sessions`.
pub const AGENT_NAMES: [&str; 5] = ["markov", "shape", "lstm", "cnn", "random"];

fn factory<A: Agent + Clone + Sync + 'static>(agent: A) -> morai_core::session::AgentFactory {
    Box::new(move || Ok(Box::new(agent.clone()) as Box<dyn Agent>))
}

/// Session manager with `random` plus every model named in the config.
pub fn build_manager(cfg: &ServiceConfig) -> Result<SessionManager, AgentError> {
    let mut m = SessionManager::new(cfg.session_config());
    m.register("random", factory(RandomAgent));
    let models = &cfg.models;
    if let Some(p) = &models.markov {
        m.register("markov", factory(MarkovAgent::new(MarkovModel::load(p)?)));
    }
    if let Some(p) = &models.shape {
        m.register("shape", factory(ShapeAgent::new(ShapeModel::load(p)?)));
    }
    if let Some(p) = &models.lstm {
        m.register("lstm", factory(LstmAgent::load(p)?));
    }
    if let Some(p) = &models.cnn {
        // threshold, cap and online rate travel with the weights
        m.register("cnn", factory(CnnModel::load(p)?));
    }
    log::info!("agents: {}", m.agent_names().join(", "));
    Ok(m)
}
