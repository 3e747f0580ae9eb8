#include "dexmouse/logger.hpp"

namespace dexmouse::logger {

FileSink::FileSink(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw StorageError("cannot open episode file " + path.string());
}

void FileSink::write_line(const std::string& line) {
  out_ << line << '\n';
  if (!out_) throw StorageError("write failed on " + path_.string());
}

void FileSink::flush() {
  out_.flush();
  if (!out_) throw StorageError("flush failed on " + path_.string());
}

void FileSink::close() {
  if (out_.is_open()) {
    out_.close();
    if (out_.fail()) throw StorageError("close failed on " + path_.string());
  }
}

AsyncSink::AsyncSink(std::unique_ptr<RecordSink> inner, std::size_t capacity)
    : inner_(std::move(inner)), capacity_(capacity == 0 ? 1 : capacity), worker_([this] { run(); }) {}

AsyncSink::~AsyncSink() {
  try {
    close();
  } catch (...) {  // NOLINT(bugprone-empty-catch): destructor must not throw
  }
}

void AsyncSink::rethrow() {
  if (error_) throw StorageError(*error_);
}

void AsyncSink::write_line(const std::string& line) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return queue_.size() < capacity_ || error_ || closing_; });
  rethrow();
  if (closing_) throw StorageError("sink closed");
  queue_.push_back(line);
  idle_ = false;
  cv_.notify_all();
}

void AsyncSink::flush() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return (queue_.empty() && idle_) || error_; });
  rethrow();
}

void AsyncSink::close() {
  {
    std::unique_lock lock(mu_);
    if (closing_ && !worker_.joinable()) {
      rethrow();
      return;
    }
    closing_ = true;
    cv_.notify_all();
  }
  if (worker_.joinable()) worker_.join();
  std::unique_lock lock(mu_);
  rethrow();
}

void AsyncSink::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return !queue_.empty() || closing_; });
    if (queue_.empty() && closing_) break;
    std::deque<std::string> batch;
    batch.swap(queue_);
    cv_.notify_all();
    lock.unlock();
    std::optional<std::string> failure;
    try {
      for (const auto& line : batch) inner_->write_line(line);
      inner_->flush();
    } catch (const std::exception& e) {
      failure = e.what();
    }
    lock.lock();
    if (failure) {
      error_ = failure;
      queue_.clear();
      idle_ = true;
      cv_.notify_all();
      break;
    }
    if (queue_.empty()) idle_ = true;
    cv_.notify_all();
  }
  lock.unlock();
  try {
    inner_->close();
  } catch (const std::exception& e) {
    lock.lock();
    if (!error_) error_ = e.what();
  }
}

EpisodeWriter::EpisodeWriter(std::unique_ptr<RecordSink> sink) : sink_(std::move(sink)) {
  if (!sink_) throw LogError("null sink");
}

void EpisodeWriter::write_header(const EpisodeHeader& header) {
  if (header_written_) throw LogError("header already written");
  sink_->write_line(to_json(header).dump());
  sink_->flush();
  header_written_ = true;
}

void EpisodeWriter::record(const LogRecord& r) {
  if (!header_written_) throw LogError("record before header");
  if (closed_) throw LogError("episode closed");
  sink_->write_line(serialize(r));
  ++records_;
  if (!last_flush_ || r.t.ns - last_flush_->ns >= kFlushIntervalNs) {
    sink_->flush();
    last_flush_ = r.t;
  }
}

void EpisodeWriter::close() {
  if (closed_) return;
  closed_ = true;
  sink_->flush();
  sink_->close();
}

}  // namespace dexmouse::logger
