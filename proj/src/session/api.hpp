#pragma once

#include <memory>

#include "dexmouse/session.hpp"

namespace dexmouse::session {

/// WebSocket endpoint on 127.0.0.1 serving StateMessage/CommandMessage JSON.
/// Runs its own io thread and touches the session only through its queues.
class Session::Api {
 public:
  Api(Session& session, int port);
  ~Api();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dexmouse::session
