#pragma once

namespace gridbound {

/// Routes spdlog to stderr at the level named by GRIDBOUND_LOG (error, info
/// or debug; info when unset). Unknown values fall back to info with a
/// warning.
void init_logging();

}  // namespace gridbound
