#ifndef E2E_IO_HPP
#define E2E_IO_HPP

#include <string>
#include <vector>

#include "e2e/eval.hpp"
#include "e2e/train.hpp"

namespace e2e {

// All CSV files are UTF-8, comma separated, newline terminated, with the
// documented header row. Numbers are printed with %.10g so identical runs
// produce identical bytes.
std::string format_double(double v);

void write_train_log_csv(const std::string& path, const TrainLog& log);          // iteration,phase,loss
void write_bler_csv(const std::string& path, const std::vector<BlerPoint>& pts); // snr_db,bler,blocks,errors,ci95
void write_theorem1_csv(const std::string& path, const std::vector<Theorem1Row>& rows);
void write_variance_csv(const std::string& path, const std::vector<VarianceRecord>& recs);
void write_feedback_csv(const std::string& path, const std::vector<FeedbackRow>& rows);

// Model snapshot (JSON): architecture, normalization target and all
// parameters; round-trips bit-exactly through the decimal encoding.
void save_system(const std::string& path, const CommSystem& sys);
CommSystem load_system(const std::string& path);

} // namespace e2e

#endif
