bool is_valid(int value);
void report_gap(int scores[], vector<int> &bonus, int idx) {
    int base = scores[idx];
    int gap = base - bonus[idx];
    if (is_valid(gap)) {
        double ratio = gap;
    } else {
        cout << gap;
    }
    int best = base;
    int lo = idx, hi = 0;
}
