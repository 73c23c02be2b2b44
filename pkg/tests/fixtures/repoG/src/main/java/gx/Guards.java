package gx;

public class Guards {

    public void ifPositive(int x) {
        if (x > 0) {
            throw new IllegalArgumentException("positive");
        }
    }

    public void elseOnly(int x) {
        if (x > 0) {
            noop();
        } else {
            throw new IllegalStateException("non-positive");
        }
    }

    public void assignBeforeThrow(int a) {
        int t = a * 2;
        if (t > 10) {
            throw new IllegalArgumentException("doubled too large");
        }
    }

    public void caller(int a) {
        callee(a + 1);
    }

    private void callee(int v) {
        if (v == 0) {
            throw new IllegalArgumentException("zero");
        }
    }

    public void chainAssign(int a) {
        int b = a - 3;
        inner(b);
    }

    private void inner(int c) {
        if (c == 0) {
            throw new IllegalStateException("aligned");
        }
    }

    public void forLoop(int n) {
        for (int i = 0; i < n; i++) {
            if (i == 3) {
                throw new IllegalStateException("hit three");
            }
        }
    }

    public void whileLoop(int n) {
        int i = n;
        while (i > 0) {
            if (i == 1) {
                throw new IllegalArgumentException("countdown end");
            }
            i--;
        }
    }

    public void pickCase(int k) {
        switch (k) {
            case 1:
                throw new IllegalArgumentException("one");
            case 2:
                noop();
                break;
            default:
                throw new IllegalStateException("other");
        }
    }

    public void nested(int x, int y) {
        if (x > 0) {
            if (y % 2 == 0) {
                throw new IllegalArgumentException("even with positive");
            }
        }
    }

    public void compound(int x) {
        if (x > 0 && x < 10) {
            throw new IllegalStateException("in range");
        }
    }

    public void reassigned(int x) {
        int t = x + 1;
        t = t * 2;
        if (t == 6) {
            throw new IllegalArgumentException("six");
        }
    }

    public void negated(int x) {
        if (!(x == 2)) {
            noop();
        } else {
            throw new IllegalStateException("exactly two");
        }
    }

    public void truncDiv(int x) {
        if (x / 2 == -3) {
            throw new IllegalArgumentException("halves to minus three");
        }
    }

    public void modThrow(int x) {
        if (x % 3 == 2) {
            throw new IllegalStateException("remainder two");
        }
    }

    public void ternaryGuard(int x) {
        if ((x > 0 ? x : -x) > 5) {
            throw new IllegalArgumentException("magnitude");
        }
    }

    private void noop() {
    }
}
