#include <vector>
using namespace std;
vector<int> doubled(vector<int> xs) {
    vector<int> out;
    for (int x : xs) {
        out.push_back(x * 2);
    }
    return out;
}
