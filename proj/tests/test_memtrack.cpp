#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "revsnn/memtrack.hpp"
#include "revsnn/tape.hpp"

using namespace revsnn;

TEST_CASE("ledger bookkeeping identities") {
  MemoryLedger led;
  led.track(MemCategory::activations, 100, MemEvent::alloc);
  led.track(MemCategory::activations, 100, MemEvent::free_);
  CHECK(led.live(MemCategory::activations) == 0);
  CHECK(led.peak(MemCategory::activations) == 100);

  led.reset();
  led.track(MemCategory::activations, 100, MemEvent::alloc);
  led.track(MemCategory::activations, 50, MemEvent::alloc);
  led.track(MemCategory::activations, 100, MemEvent::free_);
  CHECK(led.live(MemCategory::activations) == 50);
  CHECK(led.peak(MemCategory::activations) == 150);
}

TEST_CASE("zero-byte allocations leave the peak untouched") {
  MemoryLedger led;
  led.track(MemCategory::neuron_state, 0, MemEvent::alloc);
  led.track(MemCategory::neuron_state, 0, MemEvent::alloc);
  CHECK(led.peak(MemCategory::neuron_state) == 0);
  CHECK(led.live(MemCategory::neuron_state) == 0);
}

TEST_CASE("free without matching alloc corrupts the ledger") {
  MemoryLedger led;
  led.track(MemCategory::gradients, 64, MemEvent::alloc);
  CHECK_THROWS_AS(led.track(MemCategory::gradients, 32, MemEvent::free_), LedgerError);
  CHECK_THROWS_AS(led.track(MemCategory::activations, 64, MemEvent::free_), LedgerError);
  led.track(MemCategory::gradients, 64, MemEvent::free_);
  CHECK_THROWS_AS(led.track(MemCategory::gradients, 64, MemEvent::free_), LedgerError);
}

TEST_CASE("snapshot of a fresh ledger is all zeros") {
  MemoryLedger led;
  MemoryReport r = led.snapshot();
  CHECK(r.total_live() == 0);
  CHECK(r.total_peak() == 0);
  for (const auto& e : r.categories) {
    CHECK(e.live == 0);
    CHECK(e.peak == 0);
  }
}

TEST_CASE("peak reset collapses to live") {
  MemoryLedger led;
  led.track(MemCategory::activations, 200, MemEvent::alloc);
  led.track(MemCategory::activations, 200, MemEvent::free_);
  led.track(MemCategory::activations, 40, MemEvent::alloc);
  CHECK(led.peak(MemCategory::activations) == 200);
  led.reset_peaks();
  CHECK(led.peak(MemCategory::activations) == 40);
}

TEST_CASE("report serializes with the frozen fields") {
  MemoryLedger led;
  led.set_run_meta(4, 2, 8, "reversible");
  led.track(MemCategory::parameters, 1024, MemEvent::alloc);
  nlohmann::json j = led.snapshot().to_json();
  CHECK(j["depth"] == 4);
  CHECK(j["timesteps"] == 2);
  CHECK(j["batch"] == 8);
  CHECK(j["mode"] == "reversible");
  REQUIRE(j["categories"].is_array());
  REQUIRE(j["categories"].size() == 4);
  for (const auto& e : j["categories"]) {
    CHECK(e.contains("category"));
    CHECK(e.contains("live"));
    CHECK(e.contains("peak"));
  }
  // round-trips through the JSON parser
  nlohmann::json back = nlohmann::json::parse(j.dump());
  CHECK(back == j);
}

TEST_CASE("tape charges and releases the ledger") {
  MemoryLedger led;
  {
    Tape<double> tape(&led);
    tape.put(1, 0, "x", Tensor<double>::zeros({4, 4}), MemCategory::activations);
    tape.put(2, 0, "H", Tensor<double>::zeros({4, 4}), MemCategory::neuron_state);
    tape.put_stats(3, Tensor<double>::zeros({4}), Tensor<double>::zeros({4}));
    CHECK(led.live(MemCategory::activations) == 16 * 8 + 8 * 8);
    CHECK(led.live(MemCategory::neuron_state) == 16 * 8);
    CHECK_THROWS_AS(tape.put(1, 0, "x", Tensor<double>::zeros({4, 4}),
                             MemCategory::activations),
                    ContractError);
    CHECK_THROWS_AS(tape.get(9, 0, "x"), ContractError);
    CHECK_THROWS_AS(tape.stats(9), ContractError);
  }
  CHECK(led.live(MemCategory::activations) == 0);
  CHECK(led.live(MemCategory::neuron_state) == 0);
  CHECK(led.peak(MemCategory::activations) == 16 * 8 + 8 * 8);
}
