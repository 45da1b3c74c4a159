# @gpu-transfer batch=0 h2d b before-loop0 multiplicity=1
# @gpu-transfer batch=1 d2h d after-loop0 multiplicity=1
# @gpu-transfer batch=2 d2h a after-loop1 multiplicity=8
# @gpu-transfer batch=3 h2d c before-loop3 multiplicity=8
a = [0.0] * 256
b = [0.0] * 256
c = [0.0] * 256
d = [0.0] * 256
t = 0
i = 0

def main():
    for t in range(0, 8):
        # @gpu-kernel begin loop1 present=b
        for i in range(0, 256):
            a[i] = b[i] * 2.0
        # @gpu-kernel end loop1
        for i in range(0, 256):
            c[i] = a[i] + c[i]
        # @gpu-kernel begin loop3 present=d
        for i in range(0, 256):
            d[i] = c[i] * 0.5
        # @gpu-kernel end loop3
    report(d)
