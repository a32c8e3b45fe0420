#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace distreg {

/** One named column, either numeric or categorical.
 *
 * Missing numeric entries are NaN; missing categorical entries are the empty string.
 */
struct Column {
    std::string name;
    bool categorical = false;
    std::vector<double> num;
    std::vector<std::string> cat;

    std::size_t size() const { return categorical ? cat.size() : num.size(); }
    bool missing(std::size_t i) const;
    /// Sorted distinct non-missing levels of a categorical column.
    std::vector<std::string> levels() const;
};

/** Named columns of equal length. */
class DataTable {
    public:
        DataTable() = default;

        void add_numeric(std::string name, std::vector<double> values);
        void add_categorical(std::string name, std::vector<std::string> values);

        std::size_t nrows() const { return nrows_; }
        std::size_t ncols() const { return columns_.size(); }
        bool has(const std::string& name) const;
        const Column& column(const std::string& name) const;
        const std::vector<Column>& columns() const { return columns_; }

        /// Returns a table holding only the given rows, in the given order.
        DataTable select_rows(const std::vector<std::size_t>& rows) const;

    private:
        void add_(Column c);

        std::vector<Column> columns_;
        std::size_t nrows_ = 0;
};

/** Reads a comma-separated file with a header row.
 *
 * A column is numeric when every non-missing cell parses as a number; `NA` and empty
 * cells are missing. Double-quoted fields are unquoted.
 */
DataTable read_csv(const std::string& path);
DataTable parse_csv(const std::string& text);

void write_csv(const DataTable& table, const std::string& path);

}
